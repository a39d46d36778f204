"""Online multimodal 3D tracker with a scikit-learn style estimator surface.

Each frame runs: predict -> geometry/appearance affinities -> fused
assignment -> Kalman update and bank refresh -> break unmatched tracks ->
regain broken tracks from leftover detections -> spawn tentative tracks ->
retire stale broken tracks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .association import (Feature, FeatureMemoryBank, _feature_matrix, appearance_affinity,
                          assign, fuse_affinity)
from .config import RunConfig
from .geometry import Box3D, as_box_array, diou3d_matrix, wrap_angle
from .motion import BoxKalmanFilter, KalmanState
from .regain import (BrokenTrack, FieldModel, classify_exit, geometry_constraint, interpolate,
                     regain, regain_score)
from .validation import check_frame_sequence, check_unit_interval

logger = logging.getLogger(__name__)


class TrackStatus(str, Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    BROKEN = "broken"
    EXITED = "exited"


@dataclass
class Detection:
    box: Box3D
    confidence: float = 1.0
    features: list[Feature] = field(default_factory=list)
    _fm: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def valid_features(self) -> list[Feature]:
        return [f for f in self.features if f.valid]

    def feature_matrix(self) -> np.ndarray:
        """Unit rows of the valid features, computed once."""
        if self._fm is None:
            self._fm = _feature_matrix(self.valid_features())
        return self._fm


@dataclass
class FrameInput:
    frame: int
    detections: list[Detection] = field(default_factory=list)


@dataclass
class TrackPoint:
    box: Box3D
    interpolated: bool = False
    detection: Optional[int] = None


@dataclass
class Track:
    id: int
    kalman: KalmanState
    bank: FeatureMemoryBank
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    age: int = 0
    last_frame: int = 0
    last_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    exit_edge: Optional[str] = None
    confirmed: bool = False
    history: dict[int, TrackPoint] = field(default_factory=dict)


@dataclass
class TrajectorySet:
    """Per-frame identified boxes plus per-track summaries."""

    frames: list[int] = field(default_factory=list)
    boxes: dict[int, list[tuple[int, Box3D, bool]]] = field(default_factory=dict)
    summaries: dict[int, dict] = field(default_factory=dict)

    def __len__(self):
        return len(self.summaries)

    def labeled_frames(self) -> list[tuple[int, list[tuple[int, Box3D]]]]:
        return [(f, [(i, b) for i, b, _ in self.boxes.get(f, [])]) for f in self.frames]

    def track(self, track_id: int) -> list[tuple[int, Box3D]]:
        return [(f, b) for f in self.frames for i, b, _ in self.boxes.get(f, []) if i == track_id]


def _state_boxes(tracks) -> np.ndarray:
    """``(N, 7)`` predicted boxes, as ``KalmanState.box`` would build them."""
    if not tracks:
        return np.zeros((0, 7))
    m = np.stack([t.kalman.mean[:7] for t in tracks])
    m[:, 4:7] = np.maximum(m[:, 4:7], 1e-3)
    m[:, 3] = wrap_angle(m[:, 3])
    return m


class MultiModalTracker(BaseEstimator):
    """Tracking-by-detection over fused 3D DIoU and top-k appearance affinity.

    ``alpha`` weights geometry against appearance (1 disables appearance,
    0 disables geometry). Parameters mirror :class:`RunConfig`.
    """

    def __init__(self, alpha=0.5, k=5, bank_capacity=60, bank_window=30, min_score=0.2,
                 regain_threshold=0.5, r0=1.0, v_max=10.0, hit_confirm=2, max_broken_age=100,
                 confidence_gate=0.0, use_regain=True, use_geometry_constraint=True,
                 field=None, frame_rate=10.0, kalman=None):
        self.alpha = alpha
        self.k = k
        self.bank_capacity = bank_capacity
        self.bank_window = bank_window
        self.min_score = min_score
        self.regain_threshold = regain_threshold
        self.r0 = r0
        self.v_max = v_max
        self.hit_confirm = hit_confirm
        self.max_broken_age = max_broken_age
        self.confidence_gate = confidence_gate
        self.use_regain = use_regain
        self.use_geometry_constraint = use_geometry_constraint
        self.field = field
        self.frame_rate = frame_rate
        self.kalman = kalman

    @classmethod
    def from_config(cls, cfg: RunConfig, **overrides) -> "MultiModalTracker":
        params = dict(alpha=cfg.alpha, k=cfg.k, bank_capacity=cfg.bank_capacity,
                      bank_window=cfg.bank_window, min_score=cfg.min_score,
                      regain_threshold=cfg.regain_threshold, r0=cfg.r0, v_max=cfg.v_max,
                      hit_confirm=cfg.hit_confirm, max_broken_age=cfg.max_broken_age,
                      confidence_gate=cfg.confidence_gate, use_regain=cfg.use_regain,
                      use_geometry_constraint=cfg.use_geometry_constraint, field=cfg.field,
                      frame_rate=cfg.frame_rate)
        params.update(overrides)
        return cls(**params)

    # -- session -------------------------------------------------------------

    def reset(self) -> "MultiModalTracker":
        check_unit_interval(self.alpha, "alpha")
        check_unit_interval(self.min_score, "min_score")
        if self.k < 1 or self.hit_confirm < 1 or self.max_broken_age < 1:
            raise ValueError("k, hit_confirm and max_broken_age must be >= 1")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        self.field_ = self.field if self.field is not None else FieldModel()
        self.kf_ = self.kalman if self.kalman is not None else BoxKalmanFilter()
        self.dt_ = 1.0 / self.frame_rate
        self.tracks_: list[Track] = []
        self.finished_: list[Track] = []
        self.frames_: list[int] = []
        self.next_id_ = 1
        self.last_frame_: Optional[int] = None
        return self

    def _live(self, *statuses) -> list[Track]:
        return [t for t in self.tracks_ if t.status in statuses]

    def step(self, frame: FrameInput) -> list[tuple[int, Box3D, TrackStatus]]:
        """Advance the session by one frame; returns boxes of tracks confirmed
        and observed (or regained) in this frame."""
        if not hasattr(self, "tracks_"):
            self.reset()
        now = int(frame.frame)
        if self.last_frame_ is not None and now <= self.last_frame_:
            raise ValueError(f"frame index {now} does not advance past {self.last_frame_}")
        dt = (now - self.last_frame_) * self.dt_ if self.last_frame_ is not None else self.dt_
        self.last_frame_ = now
        self.frames_.append(now)

        dets = [d for d in frame.detections if d.confidence >= self.confidence_gate]
        use_app = self.alpha < 1.0
        det_feats = [d.feature_matrix() if use_app else np.zeros((0, 0))
                     for d in dets]
        det_arr = as_box_array([d.box for d in dets])

        self._predict(dt)

        # association over tentative and active tracks
        cands = self._live(TrackStatus.TENTATIVE, TrackStatus.ACTIVE)
        pred_arr = _state_boxes(cands)
        s_ge = diou3d_matrix(pred_arr, det_arr)
        s_ap = appearance_affinity(det_feats, [t.bank for t in cands], self.k, s_ge, unit=True) \
            if use_app else s_ge
        s = fuse_affinity(s_ge, s_ap, self.alpha)
        matches, um_tracks, um_dets = assign(s, self.min_score)

        out = []
        if matches:
            states = self.kf_.update_many([cands[ti].kalman for ti, _ in matches],
                                          det_arr[[di for _, di in matches]])
            for (ti, di), st in zip(matches, states):
                self._apply_update(cands[ti], dets[di], di, now, st)
        for ti in um_tracks:
            t = cands[ti]
            if t.status == TrackStatus.TENTATIVE:
                t.status = TrackStatus.EXITED
            else:
                t.status = TrackStatus.BROKEN
                t.exit_edge = classify_exit(t.last_position, self.field_)

        if self.use_regain and um_dets:
            um_dets = self._regain(dets, det_feats, um_dets, now)

        for di in um_dets:
            self._spawn(dets[di], di, now)

        for t in self._live(TrackStatus.BROKEN):
            if now - t.last_frame > self.max_broken_age:
                t.status = TrackStatus.EXITED

        for t in self.tracks_:
            if t.status == TrackStatus.EXITED:
                if t.confirmed:
                    self.finished_.append(t)
            elif t.status == TrackStatus.ACTIVE and t.last_frame == now:
                out.append((t.id, t.history[now].box, t.status))
        self.tracks_ = [t for t in self.tracks_ if t.status != TrackStatus.EXITED]
        return sorted(out, key=lambda r: r[0])

    def _predict(self, dt: float):
        # edge-exited broken tracks stay frozen where they left the field
        moving = [t for t in self.tracks_
                  if not (t.status == TrackStatus.BROKEN and t.exit_edge is not None)]
        for t, nxt in zip(moving, self.kf_.predict_many([t.kalman for t in moving], dt)):
            # inside broken tracks stop at the boundary
            if t.status == TrackStatus.BROKEN and not self.field_.contains(nxt.mean):
                continue
            t.kalman = nxt

    def _apply_update(self, t: Track, det: Detection, di: int, now: int,
                      state: Optional[KalmanState] = None):
        t.kalman = state if state is not None else self.kf_.update(t.kalman, det.box)
        t.bank.add_rows(det.feature_matrix(), now)
        t.hits += 1
        t.last_frame = now
        t.last_position = t.kalman.position
        t.history[now] = TrackPoint(t.kalman.box(), False, di)
        if t.status == TrackStatus.TENTATIVE and t.hits >= self.hit_confirm:
            t.status = TrackStatus.ACTIVE
            t.confirmed = True

    def _spawn(self, det: Detection, di: int, now: int):
        bank = FeatureMemoryBank(self.bank_capacity, self.bank_window)
        bank.add_rows(det.feature_matrix(), now)
        state = self.kf_.initiate(det.box)
        t = Track(self.next_id_, state, bank, last_frame=now, last_position=det.box.center.copy())
        t.history[now] = TrackPoint(det.box, False, di)
        if self.hit_confirm <= 1:
            t.status = TrackStatus.ACTIVE
            t.confirmed = True
        self.next_id_ += 1
        self.tracks_.append(t)

    def _regain(self, dets, det_feats, um_dets, now) -> list[int]:
        broken = self._live(TrackStatus.BROKEN)
        if not broken:
            return um_dets
        cand_arr = as_box_array([dets[i].box for i in um_dets])
        pred_arr = _state_boxes(broken)
        g = diou3d_matrix(cand_arr, pred_arr)
        if self.alpha < 1.0:
            a = appearance_affinity([det_feats[i] for i in um_dets], [t.bank for t in broken],
                                    self.k, g.T, unit=True).T
        else:
            a = g
        scores = np.full(g.shape, -1.0)
        for r, di in enumerate(um_dets):
            for c, t in enumerate(broken):
                ok = True
                if self.use_geometry_constraint:
                    ok = geometry_constraint(
                        dets[di].box,
                        BrokenTrack(t.id, t.exit_edge, t.last_position, t.last_frame),
                        self.field_, now, self.dt_, self.v_max, self.r0)
                scores[r, c] = regain_score(g[r, c], a[r, c], self.alpha,
                                            t.exit_edge is not None, ok)
        keys = [tuple(dets[i].box.as_array()) for i in um_dets]
        pairs = regain(scores, [t.id for t in broken], self.regain_threshold, keys)
        claimed = set()
        for r, c in pairs:
            di, t = um_dets[r], broken[c]
            det = dets[di]
            gap_start = t.last_frame
            via_edge = t.exit_edge is not None
            if via_edge:
                t.kalman = self.kf_.initiate(det.box)
            else:
                t.kalman = self.kf_.update(t.kalman, det.box)
            t.status = TrackStatus.ACTIVE
            t.hits += 1
            t.exit_edge = None
            t.bank.add_rows(det.feature_matrix(), now)
            t.last_frame = now
            t.last_position = t.kalman.position
            t.history[now] = TrackPoint(t.kalman.box(), False, di)
            # gaps through the field boundary stay unfilled: the object was off-field
            if not via_edge and gap_start in t.history:
                hist = {gap_start: t.history[gap_start].box, now: t.history[now].box}
                for f, box in interpolate(hist, gap_start, now).items():
                    t.history[f] = TrackPoint(box, True, None)
            claimed.add(di)
            logger.debug("frame %d: regained track %d after %d frames", now, t.id, now - gap_start)
        return [i for i in um_dets if i not in claimed]

    # -- estimator surface ---------------------------------------------------

    def partial_fit(self, frame: FrameInput, y=None) -> "MultiModalTracker":
        self.step(frame)
        return self

    def fit(self, frames: Iterable[FrameInput], y=None) -> "MultiModalTracker":
        frames = check_frame_sequence(frames)
        self.reset()
        for fr in frames:
            self.step(fr)
        self.trajectories_ = self.trajectories()
        return self

    def fit_predict(self, frames: Iterable[FrameInput], y=None) -> TrajectorySet:
        return self.fit(frames).trajectories_

    def predict(self, frames: Iterable[FrameInput]) -> TrajectorySet:
        """Track ``frames`` in a fresh session with the same parameters; the
        fitted session is left untouched."""
        check_is_fitted(self, "trajectories_")
        from sklearn.base import clone
        return clone(self).fit_predict(frames)

    def trajectories(self) -> TrajectorySet:
        if not hasattr(self, "tracks_"):
            self.reset()
        boxes: dict[int, list] = {f: [] for f in self.frames_}
        summaries = {}
        for t in sorted(self.finished_ + self.tracks_, key=lambda t: t.id):
            if not t.confirmed:
                continue
            frames = sorted(t.history)
            for f in frames:
                p = t.history[f]
                boxes.setdefault(f, []).append((t.id, p.box, p.interpolated))
            summaries[t.id] = {
                "first_frame": frames[0], "last_frame": frames[-1], "n_frames": len(frames),
                "n_interpolated": sum(t.history[f].interpolated for f in frames),
                "status": t.status.value,
            }
        for f in boxes:
            boxes[f].sort(key=lambda r: r[0])
        return TrajectorySet(list(self.frames_), boxes, summaries)


def run(config: RunConfig, frames: Sequence[FrameInput], **overrides) -> TrajectorySet:
    return MultiModalTracker.from_config(config, **overrides).fit_predict(frames)
