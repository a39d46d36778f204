"""Deterministic synthetic scenarios: agent motion along waypoint schedules,
LiDAR rosette-scan visibility, noisy detections with per-view appearance
features, merges of close agents and random dropouts.

All randomness comes from ``numpy.random.Generator(PCG64(seed))`` so a fixed
seed reproduces the output on any platform.
"""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .association import Feature
from .geometry import Box2D, Box3D, CameraModel, box_corners, occlusion_filter
from .regain import FieldModel
from .tracker import Detection, FrameInput

SCAN_RATE = 1e5          # samples per second
SCAN_STEP = 0.0017       # polar angle advance per sample, rad
SCAN_FREQ = 3.825        # rosette angular frequency
MAX_AGENT_SPEED = 12.0   # m/s
PERSON_DIMS = (0.6, 0.6, 1.8)


@functools.lru_cache(maxsize=8)
def _scan_basis(n: int, dtype=np.float64):
    phi = SCAN_STEP * np.arange(n)
    return tuple(v.astype(dtype) for v in (np.cos(phi), np.sin(phi),
                                           np.cos(SCAN_FREQ * phi), np.sin(SCAN_FREQ * phi)))


def _scan_xy(n: int, alpha: float, theta0: float, dtype=np.float64):
    # angle-sum identities on cached per-sample terms
    c, s, cf, sf = _scan_basis(n, dtype)
    c0, s0 = math.cos(theta0), math.sin(theta0)
    cf0, sf0 = math.cos(SCAN_FREQ * theta0), math.sin(SCAN_FREQ * theta0)
    r = alpha * (cf0 * cf - sf0 * sf)
    return r * (c0 * c - s0 * s), r * (s0 * c + c0 * s)


def _scan_count(t: float) -> int:
    if not t > 0:
        raise ValueError("scan duration must be positive")
    return int(math.floor(t * SCAN_RATE + 1e-9)) + 1


def lidar_scan_samples(t: float, alpha: float, theta0: float = 0.0, center=(0.0, 0.0)) -> np.ndarray:
    """Rosette scan pattern accumulated over ``t`` seconds, in image pixels.

    Sample ``n`` lies at polar angle ``theta0 + SCAN_STEP * n`` and radius
    ``alpha * cos(SCAN_FREQ * theta)`` around ``center``.
    """
    x, y = _scan_xy(_scan_count(t), alpha, theta0)
    return np.stack([center[0] + x, center[1] + y], axis=1)

# ---------------------------------------------------------------------------
# configuration

@dataclass
class LidarSpec:
    """Non-repetitive scanning LiDAR aimed from ``position`` at ``target``.
    Scan offsets of ``alpha`` pixels correspond to ``half_fov_deg``."""

    position: tuple
    target: tuple
    half_fov_deg: float = 19.2
    alpha: float = 100.0

    def rotation(self) -> np.ndarray:
        key = (tuple(self.position), tuple(self.target))
        if getattr(self, "_rot_key", None) != key:
            self._rot = CameraModel.look_at(self.position, self.target, 1.0, 1.0, 2, 2).rotation
            self._rot_key = key
        return self._rot

    def to_dict(self):
        return {"position": list(self.position), "target": list(self.target),
                "half_fov_deg": self.half_fov_deg, "alpha": self.alpha}


@dataclass
class AgentSpec:
    """Waypoints are dicts with ``pos`` ([x, y]) and optionally ``t`` (arrival
    time, s), ``speed`` (m/s), ``wait`` (dwell after arrival, s) and ``exit``
    (true for scripted off-field points; other points are clamped to the
    field). The first waypoint is the start position at ``t`` (default 0)."""

    waypoints: list
    speed: float = 2.0
    team: int = 0
    dims: tuple = PERSON_DIMS

    def to_dict(self):
        return {"waypoints": self.waypoints, "speed": self.speed, "team": self.team,
                "dims": list(self.dims)}


@dataclass
class NoiseConfig:
    position_sigma: float = 0.05
    feature_sigma: float = 0.1
    merge_distance: float = 0.5
    min_points: int = 20
    dropout: float = 0.01


def default_cameras(field: FieldModel) -> list[CameraModel]:
    cx, cy = 0.5 * (field.x_min + field.x_max), 0.5 * (field.y_min + field.y_max)
    out = []
    for x, y in ((field.x_min - 2, field.y_min - 2), (field.x_max + 2, field.y_min - 2),
                 (field.x_max + 2, field.y_max + 2), (field.x_min - 2, field.y_max + 2)):
        out.append(CameraModel.look_at((x, y, 8.0), (cx, cy, 0.0), 1000.0, 1000.0, 1920, 1080))
    return out


def default_lidars(field: FieldModel) -> list[LidarSpec]:
    cx, cy = 0.5 * (field.x_min + field.x_max), 0.5 * (field.y_min + field.y_max)
    w, h = field.x_max - field.x_min, field.y_max - field.y_min
    out = []
    for fx in (0.2, 0.5, 0.8):
        x = field.x_min + fx * w
        out.append(LidarSpec((x, field.y_min - h, 4.0), (x, cy, 0.9)))
        out.append(LidarSpec((x, field.y_max + h, 4.0), (x, cy, 0.9)))
    out.append(LidarSpec((field.x_min - w * 0.6, cy, 4.0), (field.x_min + 0.25 * w, cy, 0.9)))
    out.append(LidarSpec((field.x_max + w * 0.6, cy, 4.0), (field.x_max - 0.25 * w, cy, 0.9)))
    return out


@dataclass
class ScenarioConfig:
    seed: int = 0
    field: FieldModel = dataclasses.field(default_factory=FieldModel)
    agents: list = dataclasses.field(default_factory=list)
    cameras: Optional[list] = None
    lidars: Optional[list] = None
    frame_rate: float = 10.0
    duration: float = 10.0
    noise: NoiseConfig = dataclasses.field(default_factory=NoiseConfig)
    feature_dim: int = 512
    # cosine between teammates' identity embeddings; 0 gives unrelated identities
    team_similarity: float = 0.0
    occlusion_threshold: float = 0.3

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not 0.0 <= self.team_similarity < 1.0:
            raise ValueError("team_similarity must lie in [0, 1)")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        n = self.noise
        if n.position_sigma < 0 or n.feature_sigma < 0 or n.merge_distance < 0 or n.min_points < 0:
            raise ValueError("noise parameters must be non-negative")
        if not 0.0 <= n.dropout <= 1.0:
            raise ValueError("dropout must lie in [0, 1]")
        self.agents = [a if isinstance(a, AgentSpec) else AgentSpec(**a) for a in self.agents]
        if self.cameras is None:
            self.cameras = default_cameras(self.field)
        if self.lidars is None:
            self.lidars = default_lidars(self.field)
        self.cameras = [c if isinstance(c, CameraModel) else CameraModel.from_dict(c)
                        for c in self.cameras]
        self.lidars = [s if isinstance(s, LidarSpec) else LidarSpec(**s) for s in self.lidars]

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "field": self.field.to_dict(),
            "agents": [a.to_dict() for a in self.agents],
            "cameras": [c.to_dict() for c in self.cameras],
            "lidars": [s.to_dict() for s in self.lidars],
            "frame_rate": self.frame_rate, "duration": self.duration,
            "noise": dataclasses.asdict(self.noise), "feature_dim": self.feature_dim,
            "team_similarity": self.team_similarity,
            "occlusion_threshold": self.occlusion_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        if "field" in d:
            d["field"] = FieldModel(**d["field"])
        if "noise" in d:
            d["noise"] = NoiseConfig(**d["noise"])
        return cls(**d)


# ---------------------------------------------------------------------------
# ground truth

@dataclass
class GroundTruth:
    frames: list                 # [(frame, [(agent_id, Box3D), ...])]
    embeddings: dict             # agent_id -> unit identity vector
    teams: dict = dataclasses.field(default_factory=dict)
    poses: dict = dataclasses.field(default_factory=dict)   # (frame, agent_id) -> Pose3D, optional

    def labeled_frames(self):
        return self.frames

    def agent_ids(self) -> list[int]:
        return sorted(self.embeddings)


def _schedule(agent: AgentSpec, fld: FieldModel) -> tuple[np.ndarray, np.ndarray]:
    """Knot times and positions of an agent's piecewise-linear path."""
    if not agent.waypoints:
        raise ValueError("agent needs at least one waypoint")
    times, points = [], []
    now = None
    for i, wp in enumerate(agent.waypoints):
        pos = np.asarray(wp["pos"], dtype=float)[:2]
        if not wp.get("exit", False):
            pos = fld.clamp(pos)
        if i == 0:
            now = float(wp.get("t", 0.0))
        else:
            dist = float(np.linalg.norm(pos - points[-1]))
            if "t" in wp:
                arrive = float(wp["t"])
                if arrive < now:
                    raise ValueError(f"waypoint {i} arrival time precedes the previous one")
                speed = dist / (arrive - now) if arrive > now else (0.0 if dist == 0 else math.inf)
            else:
                speed = float(wp.get("speed", agent.speed))
                if not speed > 0:
                    raise ValueError(f"waypoint {i}: speed must be positive")
                arrive = now + dist / speed
            if speed > MAX_AGENT_SPEED:
                raise ValueError(f"waypoint {i} needs {speed:.2f} m/s, above {MAX_AGENT_SPEED}")
            now = arrive
        times.append(now)
        points.append(pos)
        if wp.get("wait", 0.0) > 0:
            now += float(wp["wait"])
            times.append(now)
            points.append(pos)
    return np.array(times), np.array(points)


def _path(times, points, t):
    if len(times) == 1:
        return np.repeat(points[:1], len(t), axis=0)
    return np.stack([np.interp(t, times, points[:, 0]), np.interp(t, times, points[:, 1])], axis=1)


def identity_embeddings(rng: np.random.Generator, teams: list[int], dim: int,
                        team_similarity: float = 0.0) -> np.ndarray:
    """Unit identity vectors; teammates share a component so that their
    expected cosine is ``team_similarity``."""
    def unit_rows(m):
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    team_ids = sorted(set(teams))
    team_vec = unit_rows(rng.standard_normal((len(team_ids), dim)))
    indiv = unit_rows(rng.standard_normal((len(teams), dim)))
    shared = np.array([team_vec[team_ids.index(t)] for t in teams])
    rho = team_similarity
    return unit_rows(math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * indiv)


def generate(config: ScenarioConfig) -> GroundTruth:
    """Ground-truth boxes per frame; agents outside the field are absent."""
    fld = config.field
    n = config.n_frames
    t = np.arange(n) / config.frame_rate
    rng = np.random.Generator(np.random.PCG64(config.seed))
    teams = [a.team for a in config.agents]
    emb = identity_embeddings(rng, teams, config.feature_dim, config.team_similarity) \
        if config.agents else np.zeros((0, config.feature_dim))

    tracks = []
    for a in config.agents:
        times, points = _schedule(a, fld)
        xy = _path(times, points, t)
        step = np.diff(xy, axis=0)
        yaw = np.zeros(n)
        last = 0.0
        for f in range(n):
            d = step[min(f, n - 2)] if n > 1 else np.zeros(2)
            if np.hypot(d[0], d[1]) > 1e-9:
                last = math.atan2(d[1], d[0])
            yaw[f] = last
        tracks.append((xy, yaw))

    frames = []
    for f in range(n):
        objs = []
        for i, (a, (xy, yaw)) in enumerate(zip(config.agents, tracks)):
            if not fld.contains(xy[f]):
                continue
            c = (xy[f, 0], xy[f, 1], 0.5 * a.dims[2])
            objs.append((i + 1, Box3D(c, a.dims, yaw[f])))
        frames.append((f, objs))
    return GroundTruth(frames, {i + 1: emb[i] for i in range(len(config.agents))},
                       {i + 1: a.team for i, a in enumerate(config.agents)})


# ---------------------------------------------------------------------------
# detections

def _merge_groups(centers: np.ndarray, distance: float) -> list[list[int]]:
    """Single-linkage groups of agents closer than ``distance`` (BEV)."""
    n = len(centers)
    if n < 2 or distance <= 0:
        return [[i] for i in range(n)]
    d = np.linalg.norm(centers[:, None, :2] - centers[None, :, :2], axis=2)
    _, labels = connected_components(csr_matrix(d < distance), directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    return sorted(groups.values())


def _lidar_hits(boxes: np.ndarray, lidars: list, rng: np.random.Generator, scan_time: float):
    """Scan samples falling inside each box's angular footprint, summed over
    LiDARs. Samples are tested in single precision."""
    hits = np.zeros(len(boxes), dtype=np.int64)
    corners = box_corners(boxes) if len(boxes) else np.zeros((0, 8, 3))
    n = _scan_count(scan_time)
    for spec in lidars:
        theta0 = rng.uniform(0.0, 2 * math.pi)
        if not len(boxes):
            continue
        local = (corners - np.asarray(spec.position, dtype=float)) @ spec.rotation().T
        ahead = np.all(local[:, :, 2] > 0, axis=1)
        if not ahead.any():
            continue
        caz = np.arctan2(local[:, :, 0], local[:, :, 2])
        cel = np.arctan2(local[:, :, 1], local[:, :, 2])
        fov = math.radians(spec.half_fov_deg)
        a_lo, a_hi = caz.min(axis=1), caz.max(axis=1)
        e_lo, e_hi = cel.min(axis=1), cel.max(axis=1)
        ahead &= (a_lo <= fov) & (a_hi >= -fov) & (e_lo <= fov) & (e_hi >= -fov)
        sel = np.nonzero(ahead)[0]
        if not len(sel):
            continue
        # compare in scan units: alpha pixels correspond to the half field of view
        az, el = _scan_xy(n, spec.alpha, theta0, np.float32)
        lim = (np.stack([a_lo[sel], a_hi[sel], e_lo[sel], e_hi[sel]]) * (spec.alpha / fov))
        lim = lim.astype(np.float32)[:, :, None]
        inside = (az >= lim[0]) & (az <= lim[1]) & (el >= lim[2]) & (el <= lim[3])
        hits[sel] += np.count_nonzero(inside, axis=1)
    return hits


def _project_boxes(boxes: np.ndarray, cam: CameraModel) -> list:
    """Vectorised ``project_box`` over an ``(N, 7)`` box array."""
    if not len(boxes):
        return []
    corners = box_corners(boxes)
    local = corners @ cam.rotation.T + cam.translation
    z = local[:, :, 2]
    ok = np.all(z > 0, axis=1)
    zs = np.where(z > 0, z, 1.0)
    u = cam.fx * local[:, :, 0] / zs + cam.cx
    v = cam.fy * local[:, :, 1] / zs + cam.cy
    lo = np.maximum(np.stack([u.min(axis=1), v.min(axis=1)], axis=1), 0.0)
    hi = np.minimum(np.stack([u.max(axis=1), v.max(axis=1)], axis=1), [cam.width, cam.height])
    ok &= np.all(hi > lo, axis=1)
    depth = boxes[:, :3] @ cam.rotation[2] + cam.translation[2]
    return [Box2D(lo[i], hi[i], float(depth[i])) if ok[i] else None for i in range(len(boxes))]


def render_detections(gt: GroundTruth, config: ScenarioConfig) -> list[FrameInput]:
    """Noisy per-frame detections with per-camera appearance features."""
    rng = np.random.Generator(np.random.PCG64([config.seed, 1]))
    noise = config.noise
    dim = config.feature_dim
    scan_time = 1.0 / config.frame_rate
    out = []
    for f, objs in gt.frames:
        n = len(objs)
        ids = [i for i, _ in objs]
        true = np.array([b.as_array() for _, b in objs]).reshape(n, 7)
        pos_noise = rng.normal(0.0, 1.0, (n, 3)) * noise.position_sigma
        noisy = true.copy()
        noisy[:, :3] += pos_noise

        # merge close agents into one box covering the group
        det_rows, members = [], []
        for g in _merge_groups(true[:, :3], noise.merge_distance):
            if len(g) == 1:
                det_rows.append(noisy[g[0]])
            else:
                pts = box_corners(true[g]).reshape(-1, 3)
                lo, hi = pts.min(axis=0), pts.max(axis=0)
                c = noisy[g, :3].mean(axis=0)
                ext = hi - lo
                det_rows.append(np.array([c[0], c[1], c[2], 0.0, ext[0], ext[1], ext[2]]))
            members.append(g)
        det_arr = np.array(det_rows).reshape(len(det_rows), 7)

        hits = _lidar_hits(det_arr, config.lidars, rng, scan_time)
        visible = hits >= noise.min_points

        boxes = [Box3D.from_array(r) for r in det_arr]
        views = []
        for cam in config.cameras:
            proj = _project_boxes(det_arr, cam)
            shown = [k for k, p in enumerate(proj) if p is not None and visible[k]]
            flags = occlusion_filter([proj[k] for k in shown], config.occlusion_threshold)
            valid = np.zeros(len(boxes), dtype=bool)
            valid[shown] = flags
            views.append(valid)

        drop = rng.uniform(size=len(boxes)) < noise.dropout
        feat_noise = rng.standard_normal((len(boxes), len(config.cameras), dim))
        feat_noise *= noise.feature_sigma / math.sqrt(dim)
        base = np.array([np.mean([gt.embeddings[ids[m]] for m in g], axis=0)
                         for g in members]).reshape(len(boxes), dim)
        vecs = base[:, None, :] + feat_noise
        vecs /= np.linalg.norm(vecs, axis=2, keepdims=True)
        dets = []
        for k, box in enumerate(boxes):
            if not visible[k] or drop[k]:
                continue
            single = len(members[k]) == 1
            feats = [Feature(vecs[k, v], view=v, frame=f, valid=bool(single and views[v][k]))
                     for v in range(len(config.cameras))]
            dets.append(Detection(box, 1.0, feats))
        out.append(FrameInput(f, dets))
    return out


# ---------------------------------------------------------------------------
# scenario builders

def exit_reentry_scenario(seed: int = 0, **overrides) -> ScenarioConfig:
    """One agent leaves through the east edge at t = 5 s and comes back through
    the same edge at t = 8 s, 3 m further north; a second agent stays inside."""
    agents = [
        AgentSpec([{"pos": [23.0, 6.0]}, {"pos": [28.0, 6.0], "t": 5.0},
                   {"pos": [30.0, 6.0], "t": 5.8, "exit": True},
                   {"pos": [30.0, 9.0], "t": 7.2, "exit": True},
                   {"pos": [28.0, 9.0], "t": 8.0}, {"pos": [22.0, 9.0], "t": 11.0}], team=0),
        AgentSpec([{"pos": [8.0, 4.0]}, {"pos": [12.0, 10.0], "t": 12.0}], team=1),
    ]
    kw = dict(seed=seed, agents=agents, duration=12.0)
    kw.update(overrides)
    return ScenarioConfig(**kw)


def close_merge_scenario(seed: int = 0, **overrides) -> ScenarioConfig:
    """Two agents walk past each other closely enough to be detected as one
    object for about a second, then separate."""
    agents = [
        AgentSpec([{"pos": [10.0, 7.3]}, {"pos": [13.0, 7.3], "t": 3.0, "wait": 1.0},
                   {"pos": [17.0, 5.3], "t": 7.0}, {"pos": [18.0, 5.3], "t": 10.0}], team=0),
        AgentSpec([{"pos": [16.0, 7.7]}, {"pos": [13.1, 7.7], "t": 3.0, "wait": 1.0},
                   {"pos": [9.0, 9.7], "t": 7.0}, {"pos": [8.0, 9.7], "t": 10.0}], team=1),
    ]
    kw = dict(seed=seed, agents=agents, duration=10.0)
    kw.update(overrides)
    return ScenarioConfig(**kw)


def batch_scenario(seed: int, n_agents: int = 10, duration: float = 60.0, n_exits: int = 2,
                   team_similarity: float = 0.9995, feature_dim: int = 128,
                   **overrides) -> ScenarioConfig:
    """Two-team game-like scenario: agents crowd around the baskets, run at
    mixed speeds, pause, and ``n_exits`` of them leave the field once and come
    back through the same edge at a shifted position.

    Teammates share a uniform, so by default their appearance embeddings are
    nearly identical (``team_similarity``) and appearance alone cannot tell
    them apart."""
    rng = np.random.Generator(np.random.PCG64([seed, 7]))
    fld = overrides.get("field", FieldModel())
    w, h = fld.x_max - fld.x_min, fld.y_max - fld.y_min
    baskets = [np.array([fld.x_min + 1.6, fld.y_min + h / 2]),
               np.array([fld.x_max - 1.6, fld.y_min + h / 2])]
    speeds = np.array([1.5, 3.0, 5.0, 7.0])
    exit_agents = rng.choice(n_agents, size=min(n_exits, n_agents), replace=False)
    edges = rng.permutation(["N", "S", "E", "W"])
    agents = []
    for i in range(n_agents):
        team = i % 2
        half_lo = fld.x_min + (0.0 if team == 0 else w / 2)
        pos = np.array([rng.uniform(half_lo + 1, half_lo + w / 2 - 1),
                        rng.uniform(fld.y_min + 1, fld.y_max - 1)])
        wps = [{"pos": pos.round(3).tolist()}]
        now = 0.0
        exit_at = None
        if i in exit_agents:
            exit_at = rng.uniform(0.15, 0.55) * duration
            edge = edges[list(exit_agents).index(i) % 4]
        while now < duration:
            if exit_at is not None and now >= exit_at:
                now = _append_exit(wps, pos, edge, fld, rng, now)
                pos = np.array(wps[-1]["pos"])
                exit_at = None
                continue
            if rng.uniform() < 0.5:
                target = baskets[rng.integers(2)] + rng.normal(0.0, 1.5, 2)
            else:
                target = np.array([rng.uniform(fld.x_min, fld.x_max),
                                   rng.uniform(fld.y_min, fld.y_max)])
            target = fld.clamp(target)
            speed = float(rng.choice(speeds))
            wp = {"pos": target.round(3).tolist(), "speed": speed}
            if rng.uniform() < 0.3:
                wp["wait"] = round(float(rng.uniform(0.5, 2.0)), 3)
            now += float(np.linalg.norm(target - pos)) / speed + wp.get("wait", 0.0)
            pos = target
            wps.append(wp)
        agents.append(AgentSpec(wps, team=team))
    kw = dict(seed=seed, agents=agents, duration=duration, team_similarity=team_similarity,
              feature_dim=feature_dim)
    kw.update(overrides)
    return ScenarioConfig(**kw)


def _append_exit(wps, pos, edge, fld, rng, now) -> float:
    """Walk out through ``edge``, stay off-field for a few seconds and come
    back through the same edge 2-5 m away. Returns the new schedule time."""
    along = rng.uniform(2.0, 5.0) * rng.choice([-1.0, 1.0])
    if edge in ("E", "W"):
        x_in = fld.x_max - 0.3 if edge == "E" else fld.x_min + 0.3
        x_out = fld.x_max + 2.0 if edge == "E" else fld.x_min - 2.0
        y0 = float(np.clip(pos[1], fld.y_min + 6, fld.y_max - 6))
        y1 = float(np.clip(y0 + along, fld.y_min + 1, fld.y_max - 1))
        path = [(x_in, y0), (x_out, y0), (x_out, y1), (x_in, y1)]
    else:
        y_in = fld.y_max - 0.3 if edge == "N" else fld.y_min + 0.3
        y_out = fld.y_max + 2.0 if edge == "N" else fld.y_min - 2.0
        x0 = float(np.clip(pos[0], fld.x_min + 6, fld.x_max - 6))
        x1 = float(np.clip(x0 + along, fld.x_min + 1, fld.x_max - 1))
        path = [(x0, y_in), (x0, y_out), (x1, y_out), (x1, y_in)]
    speed = 3.0
    off_time = float(rng.uniform(2.0, 5.0))
    prev = np.asarray(pos, dtype=float)
    for j, p in enumerate(path):
        p = np.asarray(p)
        wp = {"pos": [round(float(p[0]), 3), round(float(p[1]), 3)], "exit": j in (1, 2)}
        dist = float(np.linalg.norm(p - prev))
        if j == 2:
            wp["speed"] = max(dist / off_time, 0.1)
            now += dist / wp["speed"]
        else:
            wp["speed"] = speed
            now += dist / speed
        wps.append(wp)
        prev = p
    return now
