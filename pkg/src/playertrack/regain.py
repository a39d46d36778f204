"""Recovery of broken trajectories under field-geometry constraints."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .association import FeatureMemoryBank, appearance_affinity
from .geometry import Box3D, diou3d, wrap_angle

EDGES = ("N", "S", "E", "W")


@dataclass(frozen=True)
class FieldModel:
    x_min: float = 0.0
    x_max: float = 28.0
    y_min: float = 0.0
    y_max: float = 15.0
    margin: float = 1.0

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("field bounds must satisfy max > min")
        if not self.margin > 0:
            raise ValueError("field margin must be positive")

    def contains(self, position) -> bool:
        x, y = position[0], position[1]
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def edge_distances(self, position) -> dict[str, float]:
        x, y = float(position[0]), float(position[1])
        return {"N": self.y_max - y, "S": y - self.y_min,
                "E": self.x_max - x, "W": x - self.x_min}

    def in_band(self, position, edge: str) -> bool:
        return self.edge_distances(position)[edge] <= self.margin

    def clamp(self, position) -> np.ndarray:
        p = np.array(position, dtype=float)
        p[0] = min(max(p[0], self.x_min), self.x_max)
        p[1] = min(max(p[1], self.y_min), self.y_max)
        return p

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min,
                "y_max": self.y_max, "margin": self.margin}


def classify_exit(position, field: FieldModel) -> Optional[str]:
    """Edge id (``"N"``, ``"S"``, ``"E"``, ``"W"``) whose margin band holds the
    position, or None when the position is inside. Nearest edge wins; exact
    ties resolve in N, S, E, W order."""
    dist = field.edge_distances(position)
    best = None
    for e in EDGES:
        if dist[e] <= field.margin and (best is None or dist[e] < dist[best]):
            best = e
    return best


@dataclass
class BrokenTrack:
    track_id: int
    exit_edge: Optional[str]
    last_position: np.ndarray
    broken_at: int
    bank: FeatureMemoryBank = field(default_factory=FeatureMemoryBank)
    predicted_box: Optional[Box3D] = None

    def __post_init__(self):
        self.last_position = np.asarray(self.last_position, dtype=float)


def local_area_radius(broken_at: int, now: int, dt: float, v_max: float = 10.0,
                      r0: float = 1.0) -> float:
    if now < broken_at:
        raise ValueError("now must not precede broken_at")
    return r0 + v_max * (now - broken_at) * dt


def geometry_constraint(det: Box3D, broken: BrokenTrack, field: FieldModel, now: int,
                        dt: float, v_max: float = 10.0, r0: float = 1.0) -> bool:
    if broken.exit_edge is not None:
        return field.in_band(det.center, broken.exit_edge)
    radius = local_area_radius(broken.broken_at, now, dt, v_max, r0)
    gap = det.center[:2] - broken.last_position[:2]
    return math.hypot(gap[0], gap[1]) <= radius


def regain_score(geometry: float, appearance: float, alpha: float, edge_exit: bool,
                 constraint_ok: bool) -> float:
    """Combine scores for one detection / broken-track pair.

    ``geometry`` is the DIoU against the broken track's predicted box and
    ``appearance`` the affinity against its retained bank.
    """
    if not constraint_ok:
        return -1.0
    if edge_exit:
        return appearance
    return alpha * geometry + (1.0 - alpha) * appearance


def score_pair(det: Box3D, det_features, broken: BrokenTrack, alpha: float, k: int,
               constraint_ok: bool) -> float:
    if not constraint_ok:
        return -1.0
    pred = broken.predicted_box if broken.predicted_box is not None else Box3D(
        broken.last_position, det.dims, det.yaw)
    g = diou3d(det, pred)
    a = float(appearance_affinity([det_features], [broken.bank], k, np.array([[g]]))[0, 0])
    return regain_score(g, a, alpha, broken.exit_edge is not None, True)


def regain(scores: np.ndarray, track_ids: Sequence[int], threshold: float = 0.5,
           det_keys: Optional[Sequence] = None) -> list[tuple[int, int]]:
    """Greedy descending-score matching of detections (rows) to broken tracks
    (columns). Only pairs scoring above ``threshold`` are considered; ties go
    to the lower track id, then to the lower ``det_keys`` entry.

    Returns ``(detection_index, track_index)`` pairs.
    """
    scores = np.asarray(scores, dtype=float)
    n_det = scores.shape[0] if scores.ndim == 2 else 0
    if det_keys is None:
        det_keys = list(range(n_det))
    cand = [(-scores[i, j], track_ids[j], det_keys[i], i, j)
            for i, j in zip(*np.nonzero(scores > threshold))]
    cand.sort(key=lambda c: (c[0], c[1], c[2]))
    used_d, used_t, out = set(), set(), []
    for _, _, _, i, j in cand:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        out.append((int(i), int(j)))
    return out


def interpolate(history: dict, start: int, end: int) -> dict:
    """Linearly fill frames strictly between ``start`` and ``end``.

    ``history`` maps frame -> position vector or Box3D. Missing endpoints
    produce no fill and a warning.
    """
    if end - start <= 1:
        return {}
    if start not in history or end not in history:
        warnings.warn(f"cannot interpolate gap {start}-{end}: endpoint missing", stacklevel=2)
        return {}
    a, b = history[start], history[end]
    fills = {}
    for f in range(start + 1, end):
        t = (f - start) / (end - start)
        if isinstance(a, Box3D):
            dyaw = float(wrap_angle(b.yaw - a.yaw))
            fills[f] = Box3D(a.center + t * (b.center - a.center),
                             a.dims + t * (b.dims - a.dims), a.yaw + t * dyaw)
        else:
            a_arr, b_arr = np.asarray(a, float), np.asarray(b, float)
            fills[f] = a_arr + t * (b_arr - a_arr)
    return fills
