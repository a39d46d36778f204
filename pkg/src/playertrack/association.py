"""Geometry and appearance affinities, their fusion, and the assignment step."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import diou3d_matrix


@dataclass
class Feature:
    vector: np.ndarray
    view: int = 0
    frame: int = 0
    valid: bool = True

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float).ravel()
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("feature entries must be finite")


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero-norm feature vector")
    return v / n


def cosine(a, b) -> float:
    a = a.vector if isinstance(a, Feature) else np.asarray(a, dtype=float)
    b = b.vector if isinstance(b, Feature) else np.asarray(b, dtype=float)
    return float(np.clip(np.dot(_unit(a), _unit(b)), -1.0, 1.0))


class FeatureMemoryBank:
    """Per-track buffer of unit appearance vectors.

    Holds at most ``capacity`` entries, all within ``window`` frames of the
    newest one; older entries are evicted first.
    """

    def __init__(self, capacity: int = 60, window: int = 30):
        if capacity < 1 or window < 1:
            raise ValueError("capacity and window must be >= 1")
        self.capacity = capacity
        self.window = window
        self._vecs: Optional[np.ndarray] = None   # oldest first
        self._frames = np.zeros(0, dtype=np.int64)
        self._ordered = True   # frames non-decreasing, so eviction is a prefix cut

    def __len__(self):
        return len(self._frames)

    @property
    def newest_frame(self) -> Optional[int]:
        return int(self._frames[-1]) if len(self._frames) else None

    def add(self, vector, frame: int):
        self.add_rows(_unit(np.asarray(vector, dtype=float).ravel())[None], frame)

    def add_rows(self, rows: np.ndarray, frame: int):
        """Append already unit-normalised rows observed at ``frame``."""
        if len(rows) == 0:
            return
        if self._vecs is None or not len(self._frames):
            vecs, frames = rows, np.full(len(rows), int(frame), dtype=np.int64)
            self._ordered = True
        else:
            self._ordered = self._ordered and int(frame) >= self._frames[-1]
            if rows.shape[1] != self._vecs.shape[1]:
                raise ValueError("feature dimension differs from the bank's")
            vecs = np.concatenate([self._vecs, rows])
            frames = np.concatenate([self._frames, np.full(len(rows), int(frame), dtype=np.int64)])
        cut = max(0, len(frames) - self.capacity)
        if self._ordered:
            cut = max(cut, int(np.searchsorted(frames, frames[-1] - self.window, side="right")))
            self._vecs, self._frames = vecs[cut:], frames[cut:]
            return
        keep = frames > frames[-1] - self.window
        keep[:cut] = False
        self._vecs, self._frames = vecs[keep], frames[keep]

    def extend(self, features: Sequence[Feature], frame: int):
        vecs = [_unit(f.vector) for f in features if f.valid]
        if vecs:
            self.add_rows(np.stack(vecs), frame)

    def frames(self) -> list[int]:
        return self._frames.tolist()

    def matrix(self) -> np.ndarray:
        return self._vecs if self._vecs is not None and len(self._frames) else np.zeros((0, 0))


def _feature_matrix(feats) -> np.ndarray:
    """Unit rows for a detection's valid features (list of Feature or array)."""
    if isinstance(feats, np.ndarray):
        m = feats.reshape(len(feats), -1) if feats.size else np.zeros((0, 0))
    else:
        vecs = [f.vector for f in feats if f.valid]
        if not vecs:
            return np.zeros((0, 0))
        m = np.stack(vecs)
    if len(m) == 0:
        return m
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero-norm feature vector")
    return m / norms


def pair_appearance(det: np.ndarray, bank: np.ndarray, k: int) -> float:
    """Mean of the top-``k`` (clamped) cosines of every detection view row."""
    cos = np.maximum(det @ bank.T, 0.0)
    if cos.shape[1] > k:
        cos = np.partition(cos, cos.shape[1] - k, axis=1)[:, -k:]
    return float(np.clip(cos.mean(), 0.0, 1.0))


def appearance_affinity(detection_features, banks, k: int, fallback: np.ndarray,
                        unit: bool = False) -> np.ndarray:
    """Top-k cosine appearance affinity, rows = tracks, cols = detections.

    ``detection_features`` holds, per detection, its valid features (Feature
    objects or an array of vectors). ``banks`` holds one FeatureMemoryBank or
    ``(K, D)`` array per track. Pairs where the bank has fewer than ``k``
    features or the detection has none take the ``fallback`` value. With
    ``unit=True`` detection arrays are taken as already unit-normalised.
    """
    fallback = np.asarray(fallback, dtype=float)
    n_tracks, n_dets = len(banks), len(detection_features)
    if fallback.shape != (n_tracks, n_dets):
        raise ValueError(f"fallback shape {fallback.shape} != ({n_tracks}, {n_dets})")
    out = fallback.copy()
    dets = [f if unit and isinstance(f, np.ndarray) else _feature_matrix(f)
            for f in detection_features]
    has = [n for n, d in enumerate(dets) if len(d)]
    if not has or n_tracks == 0:
        return out
    rows = np.concatenate([dets[n] for n in has])
    starts = np.cumsum([0] + [len(dets[n]) for n in has[:-1]])
    counts = np.array([len(dets[n]) for n in has], dtype=float)
    mats = [b.matrix() if isinstance(b, FeatureMemoryBank) else _feature_matrix(np.asarray(b))
            for b in banks]
    use = [m for m, bank in enumerate(mats) if len(bank) >= k and len(bank) > 0]
    if not use:
        return out
    if any(mats[m].shape[1] != rows.shape[1] for m in use):
        raise ValueError("feature dimension differs between detections and bank")
    # zero-padding is harmless: clamped cosines are >= 0 and every bank has >= k rows
    width = max(len(mats[m]) for m in use)
    stacked = np.zeros((len(use), width, rows.shape[1]))
    for j, m in enumerate(use):
        stacked[j, :len(mats[m])] = mats[m]
    cos = rows @ stacked.reshape(-1, rows.shape[1]).T
    cos = np.maximum(cos.reshape(len(rows), len(use), width), 0.0)
    if width > k:
        cos = np.partition(cos, width - k, axis=2)[:, :, -k:]
    per_row = cos.mean(axis=2)
    per_det = np.add.reduceat(per_row, starts, axis=0) / counts[:, None]
    out[np.ix_(use, has)] = np.clip(per_det.T, 0.0, 1.0)
    return out


def geometry_affinity(tracks, detections) -> np.ndarray:
    return diou3d_matrix(tracks, detections)


def fuse_affinity(s_ge, s_ap, alpha: float) -> np.ndarray:
    s_ge = np.asarray(s_ge, dtype=float)
    s_ap = np.asarray(s_ap, dtype=float)
    if s_ge.shape != s_ap.shape:
        raise ValueError(f"affinity shapes differ: {s_ge.shape} vs {s_ap.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * s_ge + (1.0 - alpha) * s_ap


def assign(s, min_score: float = 0.2):
    """Maximum-total-score assignment; matches scoring below ``min_score`` are
    dissolved. Returns ``(matches, unmatched_tracks, unmatched_detections)``."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2:
        raise ValueError("affinity matrix must be 2-D")
    n_rows, n_cols = s.shape
    matches = []
    if n_rows and n_cols:
        rows, cols = linear_sum_assignment(s, maximize=True)
        matches = [(int(r), int(c)) for r, c in zip(rows, cols) if s[r, c] >= min_score]
    matched_r = {r for r, _ in matches}
    matched_c = {c for _, c in matches}
    return (sorted(matches),
            [r for r in range(n_rows) if r not in matched_r],
            [c for c in range(n_cols) if c not in matched_c])
