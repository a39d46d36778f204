"""Oriented box geometry: rotated 3D IoU, DIoU, pinhole projection and occlusion.

Boxes live in a right-handed world frame with ``z`` pointing up. A box's
length runs along its heading (``yaw`` about ``z``), width across it and
height vertically. Vectorised helpers work on ``(N, 7)`` arrays laid out as
``x, y, z, yaw, l, w, h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def wrap_angle(a):
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(eq=False)
class Box3D:
    center: np.ndarray
    dims: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        self.center = np.array(self.center, dtype=float).reshape(3)
        self.dims = np.array(self.dims, dtype=float).reshape(3)
        vals = self.center.tolist() + self.dims.tolist()
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("box center and dims must be finite")
        if min(vals[3:]) <= 0:
            raise ValueError(f"box dims must be positive, got {vals[3:]}")
        yaw = float(self.yaw)
        if not math.isfinite(yaw):
            raise ValueError("box yaw must be finite")
        self.yaw = (yaw + math.pi) % (2.0 * math.pi) - math.pi

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.center, [self.yaw], self.dims])

    @classmethod
    def from_array(cls, arr) -> "Box3D":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:3], arr[4:7], arr[3])

    def corners(self) -> np.ndarray:
        return box_corners(self.as_array()[None])[0]

    def __eq__(self, other):
        if not isinstance(other, Box3D):
            return NotImplemented
        return (np.array_equal(self.center, other.center)
                and np.array_equal(self.dims, other.dims)
                and self.yaw == other.yaw)

    def __repr__(self):
        c = ", ".join(f"{v:.3f}" for v in self.center)
        d = ", ".join(f"{v:.3f}" for v in self.dims)
        return f"Box3D(center=[{c}], dims=[{d}], yaw={self.yaw:.3f})"


@dataclass
class Box2D:
    min_corner: np.ndarray
    max_corner: np.ndarray
    depth: float

    def __post_init__(self):
        self.min_corner = np.asarray(self.min_corner, dtype=float).reshape(2)
        self.max_corner = np.asarray(self.max_corner, dtype=float).reshape(2)
        if np.any(self.min_corner > self.max_corner):
            raise ValueError("Box2D min corner must not exceed max corner")
        if not self.depth > 0:
            raise ValueError("Box2D depth must be positive")

    @property
    def area(self) -> float:
        wh = self.max_corner - self.min_corner
        return float(wh[0] * wh[1])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)


@dataclass
class CameraModel:
    """Pinhole camera. World points map to camera frame as ``R @ X + t``;
    the camera looks down its ``+z`` axis with ``x`` right and ``y`` down."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    width: int = 640
    height: int = 480

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=float).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))) > 1e-9:
            raise ValueError("camera rotation must be orthonormal")

    @classmethod
    def look_at(cls, position, target, fx, fy, width, height, up=(0.0, 0.0, 1.0)):
        """Camera at ``position`` aimed at ``target`` with the world ``up`` axis
        appearing upward in the image."""
        position = np.asarray(position, dtype=float)
        forward = np.asarray(target, dtype=float) - position
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=float))
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.stack([right, down, forward])
        return cls(fx, fy, width / 2.0, height / 2.0, rot, -rot @ position, width, height)

    def to_camera(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def project(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Project world points; returns ``(pixels, valid)`` where invalid rows
        (at or behind the image plane) hold NaN."""
        cam = self.to_camera(np.atleast_2d(points))
        valid = cam[:, 2] > 0
        z = np.where(valid, cam[:, 2], np.nan)
        u = self.fx * cam[:, 0] / z + self.cx
        v = self.fy * cam[:, 1] / z + self.cy
        return np.stack([u, v], axis=1), valid

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "R": self.rotation.tolist(), "t": self.translation.tolist(),
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(d["fx"], d["fy"], d["cx"], d["cy"], d.get("R", np.eye(3)),
                   d.get("t", np.zeros(3)), int(d.get("width", 640)), int(d.get("height", 480)))


# ---------------------------------------------------------------------------
# corners

_CORNER_SIGNS = np.array([[1, 1, -1], [-1, 1, -1], [-1, -1, -1], [1, -1, -1],
                          [1, 1, 1], [-1, 1, 1], [-1, -1, 1], [1, -1, 1]], dtype=float)


def as_box_array(boxes) -> np.ndarray:
    """Coerce a Box3D, a sequence of Box3D or an ``(N, 7)`` array to ``(N, 7)``."""
    if isinstance(boxes, Box3D):
        return boxes.as_array()[None]
    if isinstance(boxes, np.ndarray):
        return boxes.reshape(-1, 7).astype(float, copy=False)
    boxes = list(boxes)
    if not boxes:
        return np.zeros((0, 7))
    return np.stack([b.as_array() if isinstance(b, Box3D) else np.asarray(b, float)
                     for b in boxes])


def box_corners(arr: np.ndarray) -> np.ndarray:
    """``(N, 7)`` boxes to ``(N, 8, 3)`` corners; the first four are the bottom
    face in counter-clockwise order seen from above."""
    arr = np.asarray(arr, dtype=float).reshape(-1, 7)
    half = 0.5 * arr[:, None, 4:7] * _CORNER_SIGNS[None]
    c, s = np.cos(arr[:, 3]), np.sin(arr[:, 3])
    x = c[:, None] * half[..., 0] - s[:, None] * half[..., 1]
    y = s[:, None] * half[..., 0] + c[:, None] * half[..., 1]
    return np.stack([x, y, half[..., 2]], axis=-1) + arr[:, None, 0:3]


# ---------------------------------------------------------------------------
# polygon clipping (bird's-eye view)

def _shoelace(poly) -> float:
    n = len(poly)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = poly[i - 1]
        x1, y1 = poly[i]
        acc += x0 * y1 - x1 * y0
    return 0.5 * abs(acc)


def _polygon_area(poly: np.ndarray) -> float:
    return _shoelace(np.asarray(poly, dtype=float).reshape(-1, 2).tolist())


def _clip(subject: list, clipper: list) -> list:
    output = subject
    for i in range(len(clipper)):
        if not output:
            break
        ax, ay = clipper[i - 1]
        bx, by = clipper[i]
        ex, ey = bx - ax, by - ay
        inputs, output = output, []
        sx, sy = inputs[-1]
        s_side = ex * (sy - ay) - ey * (sx - ax)
        for px, py in inputs:
            p_side = ex * (py - ay) - ey * (px - ax)
            if p_side >= 0:
                if s_side < 0:
                    t = s_side / (s_side - p_side)
                    output.append((sx + t * (px - sx), sy + t * (py - sy)))
                output.append((px, py))
            elif s_side >= 0:
                t = s_side / (s_side - p_side)
                output.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy, s_side = px, py, p_side
    return output


def clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clipping of ``subject`` by a convex CCW ``clipper``."""
    subject = [tuple(p) for p in np.asarray(subject, dtype=float).tolist()]
    clipper = np.asarray(clipper, dtype=float).tolist()
    return np.asarray(_clip(subject, clipper), dtype=float).reshape(-1, 2)


def _pair_iou3d(a, b, fa: list, fb: list) -> float:
    """IoU of two ``[x, y, z, yaw, l, w, h]`` boxes given their BEV footprints."""
    za0, za1 = a[2] - 0.5 * a[6], a[2] + 0.5 * a[6]
    zb0, zb1 = b[2] - 0.5 * b[6], b[2] + 0.5 * b[6]
    dz = min(za1, zb1) - max(za0, zb0)
    if dz <= 0:
        return 0.0
    inter = _shoelace(_clip([tuple(p) for p in fa], fb)) * dz
    union = a[4] * a[5] * a[6] + b[4] * b[5] * b[6] - inter
    return float(min(max(inter / union, 0.0), 1.0))


def iou3d_matrix(a, b, corners=None) -> np.ndarray:
    """Pairwise rotated 3D IoU between two box sets. ``corners`` optionally
    passes precomputed ``(box_corners(a), box_corners(b))``."""
    a, b = as_box_array(a), as_box_array(b)
    out = np.zeros((len(a), len(b)))
    if len(a) == 0 or len(b) == 0:
        return out
    # circumscribed-circle rejection in BEV
    ra = 0.5 * np.hypot(a[:, 4], a[:, 5])
    rb = 0.5 * np.hypot(b[:, 4], b[:, 5])
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    rows, cols = np.nonzero(d < ra[:, None] + rb[None, :])
    if len(rows) == 0:
        return out
    ca, cb = corners if corners is not None else (box_corners(a), box_corners(b))
    fa, fb = ca[:, :4, :2].tolist(), cb[:, :4, :2].tolist()
    al, bl = a.tolist(), b.tolist()
    for i, j in zip(rows.tolist(), cols.tolist()):
        out[i, j] = _pair_iou3d(al[i], bl[j], fa[i], fb[j])
    return out


def _far_dz2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Largest squared vertical offset between a face of ``a`` and one of ``b``."""
    ha, hb = 0.5 * a[..., 6], 0.5 * b[..., 6]
    dz = np.abs(a[..., 2] - b[..., 2])
    return (dz + ha + hb) ** 2


def diou3d_matrix(a, b, ious: Optional[np.ndarray] = None) -> np.ndarray:
    """Pairwise 3D DIoU score ``0.5 * (IoU - rho_c^2 / rho^2 + 1)``.

    ``rho_c`` is the distance between the box centers and ``rho`` the largest
    distance between any corner of one box and any corner of the other.
    """
    a, b = as_box_array(a), as_box_array(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ca, cb = box_corners(a), box_corners(b)
    if ious is None:
        ious = iou3d_matrix(a, b, (ca, cb))
    # corners are footprint x {bottom, top}, so the planar and vertical parts
    # of the squared corner distance are maximised independently
    diff = ca[:, None, :4, None, :2] - cb[None, :, None, :4, :2]
    far2 = np.max(np.sum(diff * diff, axis=-1), axis=(2, 3)) + _far_dz2(a[:, None], b[None])
    cen2 = np.sum((a[:, None, :3] - b[None, :, :3]) ** 2, axis=-1)
    return np.clip(0.5 * (ious - cen2 / far2 + 1.0), 0.0, 1.0)


def diou3d_pairs(a, b) -> np.ndarray:
    """Elementwise DIoU of row-aligned box arrays ``a[i]``, ``b[i]``."""
    a, b = as_box_array(a), as_box_array(b)
    if len(a) != len(b):
        raise ValueError("diou3d_pairs needs equally many boxes on each side")
    if len(a) == 0:
        return np.zeros(0)
    ca, cb = box_corners(a), box_corners(b)
    diff = ca[:, :4, None, :2] - cb[:, None, :4, :2]
    far2 = np.max(np.sum(diff * diff, axis=-1), axis=(1, 2)) + _far_dz2(a, b)
    cen2 = np.sum((a[:, :3] - b[:, :3]) ** 2, axis=-1)
    ious = np.zeros(len(a))
    reach = 0.5 * (np.hypot(a[:, 4], a[:, 5]) + np.hypot(b[:, 4], b[:, 5]))
    near = np.nonzero(np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1]) < reach)[0]
    if len(near):
        al, bl = a[near].tolist(), b[near].tolist()
        fa, fb = ca[near, :4, :2].tolist(), cb[near, :4, :2].tolist()
        ious[near] = [_pair_iou3d(al[k], bl[k], fa[k], fb[k]) for k in range(len(near))]
    return np.clip(0.5 * (ious - cen2 / far2 + 1.0), 0.0, 1.0)


def iou3d(a: Box3D, b: Box3D) -> float:
    return float(iou3d_matrix(a, b)[0, 0])


def diou3d(a: Box3D, b: Box3D) -> float:
    return float(diou3d_matrix(a, b)[0, 0])


# ---------------------------------------------------------------------------
# image plane

def project_box(box: Box3D, cam: CameraModel) -> Optional[Box2D]:
    """Pixel bounding rectangle of the projected box corners, clipped to the
    image. Boxes with any corner at or behind the image plane are dropped."""
    center_cam = cam.to_camera(box.center[None])[0]
    if center_cam[2] <= 0:
        return None
    pix, valid = cam.project(box.corners())
    if not np.all(valid):
        return None
    lo = np.maximum(pix.min(axis=0), 0.0)
    hi = np.minimum(pix.max(axis=0), [cam.width, cam.height])
    if np.any(hi <= lo):
        return None
    return Box2D(lo, hi, float(center_cam[2]))


def iou2d(a: Box2D, b: Box2D) -> float:
    lo = np.maximum(a.min_corner, b.min_corner)
    hi = np.minimum(a.max_corner, b.max_corner)
    wh = np.maximum(hi - lo, 0.0)
    inter = wh[0] * wh[1]
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(inter / union)


def occlusion_filter(boxes: Sequence[Box2D], iou_threshold: float = 0.3) -> list[bool]:
    """Flag the farther box of every overlapping pair as occluded.

    Equal depths cannot be ordered, so neither box of such a pair is flagged;
    this keeps the result independent of input order.
    """
    n = len(boxes)
    if n < 2:
        return [True] * n
    lo = np.array([b.min_corner for b in boxes])
    hi = np.array([b.max_corner for b in boxes])
    depth = np.array([b.depth for b in boxes])
    wh = np.maximum(np.minimum(hi[:, None], hi[None]) - np.maximum(lo[:, None], lo[None]), 0.0)
    inter = wh[..., 0] * wh[..., 1]
    area = np.prod(hi - lo, axis=1)
    union = area[:, None] + area[None] - inter
    iou = np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)
    np.fill_diagonal(iou, 0.0)
    # box i is hidden when it overlaps a strictly nearer box
    hidden = np.any((iou > iou_threshold) & (depth[:, None] > depth[None, :]), axis=1)
    return (~hidden).tolist()


def bev_distance(a: Box3D, b: Box3D) -> float:
    return math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1])
