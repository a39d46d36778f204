"""Pose-estimation math that sits outside the networks: heatmap soft-argmax
and entropy gating, projection/3D losses, the human prior (bone length,
symmetry, joint angle) and its analytic gradient.

Joints follow the 17-point COCO order. ``neck`` and ``midhip`` are derived
nodes (shoulder and hip midpoints); skeleton terms bind joints by name.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import CameraModel

COCO_JOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
)

L_MIN = 0.05
L_MAX = 0.7
UNSUP_WEIGHTS = (0.02, 1.0, 10.0)
ENTROPY_THRESHOLD = 6.0


# ---------------------------------------------------------------------------
# heatmaps

@dataclass
class Heatmap3D:
    """Volumetric joint heatmap. ``origin`` is the centre of voxel ``(0, 0, 0)``;
    voxel ``(i, j, k)`` sits at ``origin + pitch * (i, j, k)``."""

    values: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.full(3, -1.0 + 1.0 / 64))
    pitch: float = 2.0 / 64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        if self.values.ndim != 3:
            raise ValueError("heatmap values must be a 3-D grid")
        if not self.pitch > 0:
            raise ValueError("voxel pitch must be positive")

    @classmethod
    def zeros(cls, resolution: int = 64, span: float = 2.0, center=(0.0, 0.0, 0.0)):
        pitch = span / resolution
        origin = np.asarray(center, dtype=float) - 0.5 * span + 0.5 * pitch
        return cls(np.zeros((resolution,) * 3), origin, pitch)

    @classmethod
    def from_logits(cls, logits, origin, pitch, beta: float = 1.0) -> "Heatmap3D":
        z = beta * np.asarray(logits, dtype=float)
        z = np.exp(z - z.max())
        return cls(z / z.sum(), origin, pitch)

    def voxel_center(self, index) -> np.ndarray:
        return self.origin + self.pitch * np.asarray(index, dtype=float)

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.values >= 0) and abs(self.values.sum() - 1.0) <= tol)


def normalize(h: Heatmap3D) -> Heatmap3D:
    if np.any(h.values < 0):
        raise ValueError("heatmap values must be non-negative")
    total = h.values.sum()
    if not total > 0:
        raise ValueError("cannot normalise an all-zero heatmap")
    return Heatmap3D(h.values / total, h.origin.copy(), h.pitch)


def _require_normalized(h: Heatmap3D):
    if not h.is_normalized(1e-6):
        raise ValueError("heatmap must be normalised (non-negative, summing to 1)")


def soft_argmax(h: Heatmap3D) -> np.ndarray:
    """Expected voxel-centre position under the heatmap distribution."""
    _require_normalized(h)
    v = h.values
    out = np.empty(3)
    for axis in range(3):
        others = tuple(a for a in range(3) if a != axis)
        marginal = v.sum(axis=others)
        out[axis] = np.dot(marginal, np.arange(v.shape[axis])) / marginal.sum()
    return h.origin + h.pitch * out


def entropy(h: Heatmap3D) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    _require_normalized(h)
    p = h.values[h.values > 0]
    return float(-np.sum(p * np.log(p)))


def person_uncertainty(heatmaps: Sequence[Heatmap3D]) -> float:
    if len(heatmaps) == 0:
        raise ValueError("need at least one joint heatmap")
    return max(entropy(h) for h in heatmaps)


def gate(u: float, lam: float = ENTROPY_THRESHOLD) -> bool:
    """Accept the pose as a pseudo label iff its uncertainty is below ``lam``."""
    return bool(u < lam)


# ---------------------------------------------------------------------------
# poses and supervised-style losses

@dataclass
class Pose3D:
    joints: np.ndarray
    names: tuple = COCO_JOINTS

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=float).reshape(-1, 3)
        if len(self.names) != len(self.joints):
            raise ValueError("joint-name table does not match joint count")
        if not np.all(np.isfinite(self.joints)):
            raise ValueError("pose joints must be finite")

    def __len__(self):
        return len(self.joints)


def _joints(p) -> np.ndarray:
    return p.joints if isinstance(p, Pose3D) else np.asarray(p, dtype=float).reshape(-1, 3)


def pose_l1(pred, gt) -> float:
    a, b = _joints(pred), _joints(gt)
    if a.shape != b.shape:
        raise ValueError(f"joint count mismatch: {len(a)} vs {len(b)}")
    return float(np.abs(a - b).sum())


def l3d(pred, pseudo) -> float:
    """L1 distance to an accepted pseudo 3D pose."""
    return pose_l1(pred, pseudo)


def project_pose(pose, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Pixel coordinates of every joint plus a validity mask; joints at or
    behind the camera plane are invalid (NaN pixels)."""
    return cam.project(_joints(pose))


def l2d(pose, pseudo2d: Sequence, cams: Sequence[CameraModel]) -> float:
    """Sum over views and joints of the pixel distance between projected
    joints and pseudo 2D labels; joints invalid in a view are skipped."""
    if len(pseudo2d) != len(cams):
        raise ValueError("need one pseudo 2D label set per camera")
    total = 0.0
    for labels, cam in zip(pseudo2d, cams):
        labels = np.asarray(labels, dtype=float).reshape(-1, 2)
        pix, valid = project_pose(pose, cam)
        if len(labels) != len(pix):
            raise ValueError("pseudo 2D label count does not match joints")
        ok = valid & np.all(np.isfinite(labels), axis=1)
        total += float(np.linalg.norm(pix[ok] - labels[ok], axis=1).sum())
    return total


def unsup_loss(l2d_value: float, l3d_value: float, l_prior: float, accepted: bool,
               weights=UNSUP_WEIGHTS) -> float:
    w1, w2, w3 = weights
    return w1 * l2d_value + (w2 * l3d_value if accepted else 0.0) + w3 * l_prior


# ---------------------------------------------------------------------------
# skeleton and human prior

@dataclass
class SkeletonDef:
    joint_names: tuple = COCO_JOINTS
    derived: dict = field(default_factory=lambda: {
        "neck": ("left_shoulder", "right_shoulder"),
        "midhip": ("left_hip", "right_hip"),
    })
    bones: tuple = (
        ("neck", "nose"), ("nose", "left_ear"), ("nose", "right_ear"),
        ("neck", "left_shoulder"), ("neck", "right_shoulder"),
        ("left_shoulder", "left_elbow"), ("right_shoulder", "right_elbow"),
        ("left_elbow", "left_wrist"), ("right_elbow", "right_wrist"),
        ("neck", "midhip"),
        ("midhip", "left_hip"), ("midhip", "right_hip"),
        ("left_hip", "left_knee"), ("right_hip", "right_knee"),
        ("left_knee", "left_ankle"), ("right_knee", "right_ankle"),
    )
    symmetric_pairs: tuple = ((3, 4), (5, 6), (7, 8), (10, 11), (12, 13), (14, 15))
    root: str = "neck"

    def __post_init__(self):
        nodes = list(self.joint_names) + list(self.derived)
        self.node_index = {n: i for i, n in enumerate(nodes)}
        K = len(self.joint_names)
        W = np.zeros((len(nodes), K))
        W[:K, :K] = np.eye(K)
        for name, parts in self.derived.items():
            for p in parts:
                W[self.node_index[name], self.node_index[p]] = 1.0 / len(parts)
        self.node_weights = W
        self.bone_index = np.array([[self.node_index[a], self.node_index[b]]
                                    for a, b in self.bones], dtype=np.int64)
        self._check_tree()

    def _check_tree(self):
        used = {n for b in self.bones for n in b}
        if len(self.bones) != len(used) - 1:
            raise ValueError("bone graph must be a tree")
        adj = {n: [] for n in used}
        for a, b in self.bones:
            adj[a].append(b)
            adj[b].append(a)
        depth = {self.root: 0}
        stack = [self.root]
        while stack:
            n = stack.pop()
            for m in adj[n]:
                if m not in depth:
                    depth[m] = depth[n] + 1
                    stack.append(m)
        if len(depth) != len(used):
            raise ValueError("bone graph must be connected")
        for i, j in self.symmetric_pairs:
            if depth[self.bones[i][1]] != depth[self.bones[j][1]]:
                raise ValueError(f"symmetric bones {i},{j} differ in graph depth")

    def nodes(self, joints: np.ndarray) -> np.ndarray:
        return self.node_weights @ joints

    def node(self, nodes: np.ndarray, name: str) -> np.ndarray:
        return nodes[self.node_index[name]]


def bone_lengths(pose, skel: SkeletonDef) -> np.ndarray:
    n = skel.nodes(_joints(pose))
    b = skel.bone_index
    return np.linalg.norm(n[b[:, 1]] - n[b[:, 0]], axis=1)


@dataclass
class PriorLosses:
    length: float
    symm: float
    angle: float
    prior: float
    head: float = 0.0
    leg: float = 0.0
    degenerate: bool = False

    def __iter__(self):
        return iter((self.length, self.symm, self.angle, self.prior))


def _unit(v):
    n = np.linalg.norm(v)
    return (v / n, n) if n > 0 else (None, 0.0)


def _angle_vectors(nodes, skel, forward_sign):
    neck = skel.node(nodes, "neck")
    u1, n1 = _unit(skel.node(nodes, "midhip") - neck)
    u2, n2 = _unit(skel.node(nodes, "left_shoulder") - neck)
    dn, n3 = _unit(skel.node(nodes, "nose") - neck)
    legs = []
    for side in ("left", "right"):
        knee = skel.node(nodes, f"{side}_knee")
        mid = 0.5 * (skel.node(nodes, f"{side}_hip") + skel.node(nodes, f"{side}_ankle"))
        legs.append(_unit(mid - knee))
    return (u1, n1), (u2, n2), (dn, n3), legs


def prior_losses(pose, skel: Optional[SkeletonDef] = None, l_min: float = L_MIN,
                 l_max: float = L_MAX, weights=(1.0, 1.0, 1.0),
                 forward_sign: float = 1.0) -> PriorLosses:
    """Bone-length range, left/right symmetry and head/leg angle penalties.

    ``forward_sign`` flips the body forward vector (the cross product of the
    neck->midhip and neck->left-shoulder unit vectors) for skeleton data with
    the opposite handedness.
    """
    skel = skel or SkeletonDef()
    nodes = skel.nodes(_joints(pose))
    lengths = np.linalg.norm(nodes[skel.bone_index[:, 1]] - nodes[skel.bone_index[:, 0]], axis=1)
    l_len = float(np.sum(np.maximum(lengths - l_max, 0.0) + np.maximum(l_min - lengths, 0.0)))
    l_sym = float(sum(abs(lengths[i] - lengths[j]) for i, j in skel.symmetric_pairs))

    (u1, _), (u2, _), (dn, _), legs = _angle_vectors(nodes, skel, forward_sign)
    head = leg = 0.0
    degenerate = u1 is None or u2 is None
    if not degenerate:
        fwd = forward_sign * np.cross(u1, u2)
        if np.linalg.norm(fwd) < 1e-12:
            degenerate = True
        else:
            if dn is not None:
                head = float(np.clip(fwd @ dn, 0.0, 1.0))
            for d, _ in legs:
                if d is not None:
                    leg += float(np.clip(fwd @ d, 0.0, 1.0))
    l_ang = 0.0 if degenerate else head + leg
    g1, g2, g3 = weights
    return PriorLosses(l_len, l_sym, l_ang, g1 * l_len + g2 * l_sym + g3 * l_ang,
                       head, leg, degenerate)


def _unit_grad(g, u, norm):
    """Back-propagate ``g`` through ``v -> v / |v|``."""
    return (g - u * (u @ g)) / norm


def prior_grad(pose, skel: Optional[SkeletonDef] = None, l_min: float = L_MIN,
               l_max: float = L_MAX, weights=(1.0, 1.0, 1.0),
               forward_sign: float = 1.0) -> np.ndarray:
    """Analytic gradient of the weighted prior loss w.r.t. each joint."""
    skel = skel or SkeletonDef()
    joints = _joints(pose)
    nodes = skel.nodes(joints)
    g1, g2, g3 = weights
    grad = np.zeros_like(nodes)

    b = skel.bone_index
    vec = nodes[b[:, 1]] - nodes[b[:, 0]]
    lengths = np.linalg.norm(vec, axis=1)
    if np.any(lengths == 0):
        raise ValueError("zero-length bone: gradient undefined")
    units = vec / lengths[:, None]
    dl = g1 * ((lengths > l_max).astype(float) - (lengths < l_min).astype(float))
    for i, j in skel.symmetric_pairs:
        s = g2 * np.sign(lengths[i] - lengths[j])
        dl[i] += s
        dl[j] -= s
    bone_g = dl[:, None] * units
    np.add.at(grad, b[:, 1], bone_g)
    np.add.at(grad, b[:, 0], -bone_g)

    (u1, n1), (u2, n2), (dn, n3), legs = _angle_vectors(nodes, skel, forward_sign)
    if g3 != 0 and u1 is not None and u2 is not None:
        fwd = forward_sign * np.cross(u1, u2)
        if np.linalg.norm(fwd) >= 1e-12:
            gu1 = np.zeros(3)
            gu2 = np.zeros(3)
            ix = skel.node_index
            terms = [(dn, n3, [(ix["nose"], 1.0), (ix["neck"], -1.0)])]
            for side, (d, nd) in zip(("left", "right"), legs):
                terms.append((d, nd, [(ix[f"{side}_hip"], 0.5), (ix[f"{side}_ankle"], 0.5),
                                      (ix[f"{side}_knee"], -1.0)]))
            for d, nd, parts in terms:
                if d is None:
                    continue
                dot = fwd @ d
                if not 0.0 < dot < 1.0:
                    continue
                gu1 += g3 * forward_sign * np.cross(u2, d)
                gu2 += g3 * forward_sign * np.cross(d, u1)
                gv = _unit_grad(g3 * fwd, d, nd)
                for node, w in parts:
                    grad[node] += w * gv
            gv1 = _unit_grad(gu1, u1, n1)
            gv2 = _unit_grad(gu2, u2, n2)
            grad[ix["midhip"]] += gv1
            grad[ix["neck"]] -= gv1 + gv2
            grad[ix["left_shoulder"]] += gv2
    return skel.node_weights.T @ grad


def canonical_pose() -> Pose3D:
    """Upright, mirror-symmetric reference pose facing +y (z up) with every
    prior term inactive in an open neighbourhood."""
    j = {
        "nose": (0.0, -0.02, 1.72),
        "left_eye": (-0.03, 0.0, 1.75), "right_eye": (0.03, 0.0, 1.75),
        "left_ear": (-0.08, -0.05, 1.70), "right_ear": (0.08, -0.05, 1.70),
        "left_shoulder": (-0.2, 0.0, 1.5), "right_shoulder": (0.2, 0.0, 1.5),
        "left_elbow": (-0.2, 0.0, 1.2), "right_elbow": (0.2, 0.0, 1.2),
        "left_wrist": (-0.2, 0.05, 0.95), "right_wrist": (0.2, 0.05, 0.95),
        "left_hip": (-0.1, 0.0, 1.0), "right_hip": (0.1, 0.0, 1.0),
        "left_knee": (-0.1, 0.05, 0.55), "right_knee": (0.1, 0.05, 0.55),
        "left_ankle": (-0.1, 0.0, 0.1), "right_ankle": (0.1, 0.0, 0.1),
    }
    return Pose3D(np.array([j[n] for n in COCO_JOINTS]))
