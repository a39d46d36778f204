"""Input validation helpers shared by the estimators and loaders."""
from __future__ import annotations

import numbers

import numpy as np


def check_unit_interval(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be a number in [0, 1], got {value!r}")
    return float(value)


def check_positive(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_box_array(arr, name: str = "boxes") -> np.ndarray:
    """Validate an ``(N, 7)`` array of ``x, y, z, yaw, l, w, h`` rows."""
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 7)
    if arr.ndim != 2 or arr.shape[1] != 7:
        raise ValueError(f"{name} must have shape (N, 7), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr[:, 4:7] <= 0):
        raise ValueError(f"{name} has non-positive dimensions")
    return arr


def check_frame_sequence(frames) -> list:
    """Materialise frames and verify their indices strictly increase."""
    frames = list(frames)
    prev = None
    for fr in frames:
        idx = getattr(fr, "frame", None)
        if idx is None:
            raise TypeError("frames must expose a 'frame' index")
        if prev is not None and idx <= prev:
            raise ValueError(f"frame indices must strictly increase ({prev} then {idx})")
        prev = idx
    return frames


def check_labeled_frames(frames, name: str = "frames") -> list:
    """Validate ``(frame, [(id, Box3D), ...])`` pairs: increasing frames and
    unique ids within each frame."""
    frames = list(frames)
    prev = None
    for f, objs in frames:
        if prev is not None and f <= prev:
            raise ValueError(f"{name}: frame indices must strictly increase")
        prev = f
        ids = [i for i, _ in objs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"{name}: duplicate object id within frame {f}")
    return frames
