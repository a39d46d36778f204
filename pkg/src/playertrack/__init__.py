"""Multimodal 3D multi-player tracking with trajectory regain, tracking
metrics, player analytics, pose-prior losses and a synthetic scenario
generator."""
from .analytics import HeatmapGrid, PlayerStats, heatmap, speeds, stats
from .association import (Feature, FeatureMemoryBank, appearance_affinity, assign,
                          fuse_affinity, geometry_affinity)
from .config import RunConfig
from .geometry import (Box2D, Box3D, CameraModel, diou3d, diou3d_matrix, iou2d, iou3d,
                       iou3d_matrix, occlusion_filter, project_box)
from .metrics import MetricsReport, clear_mot, evaluate, hota
from .motion import BoxKalmanFilter, KalmanState
from .regain import FieldModel, classify_exit, geometry_constraint, interpolate, regain
from .tracker import Detection, FrameInput, MultiModalTracker, TrajectorySet, run

__version__ = "0.1.0"

__all__ = [
    "Box2D", "Box3D", "BoxKalmanFilter", "CameraModel", "Detection", "Feature",
    "FeatureMemoryBank", "FieldModel", "FrameInput", "HeatmapGrid", "KalmanState",
    "MetricsReport", "MultiModalTracker", "PlayerStats", "RunConfig", "TrajectorySet",
    "appearance_affinity", "assign", "classify_exit", "clear_mot", "diou3d",
    "diou3d_matrix", "evaluate", "fuse_affinity", "geometry_affinity", "geometry_constraint",
    "heatmap", "hota", "interpolate", "iou2d", "iou3d", "iou3d_matrix", "occlusion_filter",
    "project_box", "regain", "run", "speeds", "stats",
]
