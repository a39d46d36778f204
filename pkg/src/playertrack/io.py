"""File formats: JSONL frame streams, JSON configs/reports, heatmap grids.

Every JSONL record carries ``schema_version``; readers accept any ``1.x``.
Floats are written with 9 significant digits so output bytes are stable.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .association import Feature
from .geometry import Box3D
from .poseprior import COCO_JOINTS, Heatmap3D, Pose3D
from .tracker import Detection, FrameInput

SCHEMA_VERSION = "1.0"


def _round(x):
    if isinstance(x, float):
        return float(f"{x:.9g}")
    if isinstance(x, (np.floating,)):
        return float(f"{float(x):.9g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_round(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_round(obj), sort_keys=True, separators=(",", ":"))


def write_json(path, obj):
    Path(path).write_text(json.dumps(_round(obj), sort_keys=True, indent=2) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None


def box_to_dict(b: Box3D) -> dict:
    return {"c": b.center.tolist(), "d": b.dims.tolist(), "yaw": float(b.yaw)}


def box_from_dict(d: dict) -> Box3D:
    return Box3D(d["c"], d["d"], d.get("yaw", 0.0))


def _write_lines(path, records: Iterable[dict]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps({"schema_version": SCHEMA_VERSION, **rec}) + "\n")


def _read_lines(path):
    """Yield ``(line_number, record)``; malformed lines raise with their number."""
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{no}: malformed JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise ValueError(f"{path}:{no}: record must be a JSON object")
            version = str(rec.get("schema_version", ""))
            if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
                raise ValueError(f"{path}:{no}: unsupported schema_version {version!r}")
            yield no, rec


def write_detections(path, frames: Iterable[FrameInput]):
    def rec(fr):
        return {"frame": fr.frame, "detections": [
            {"box": box_to_dict(d.box), "conf": d.confidence,
             "features": [{"view": f.view, "valid": f.valid, "vec": f.vector}
                          for f in d.features]}
            for d in fr.detections]}
    _write_lines(path, (rec(fr) for fr in frames))


def read_detections(path) -> list[FrameInput]:
    out = []
    for no, rec in _read_lines(path):
        try:
            frame = int(rec["frame"])
            dets = []
            for d in rec["detections"]:
                feats = [Feature(f["vec"], int(f.get("view", 0)), frame, bool(f.get("valid", True)))
                         for f in d.get("features", [])]
                dets.append(Detection(box_from_dict(d["box"]), float(d.get("conf", 1.0)), feats))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{no}: bad detection record ({exc})") from None
        out.append(FrameInput(frame, dets))
    return out


def write_labeled(path, frames, interpolated: Optional[dict] = None):
    """``frames`` is ``[(frame, [(id, Box3D), ...])]``; ``interpolated`` maps
    ``(frame, id)`` to True for filled-in boxes."""
    interpolated = interpolated or {}

    def rec(f, objs):
        items = []
        for i, b in objs:
            item = {"id": int(i), "box": box_to_dict(b)}
            if interpolated.get((f, i)):
                item["interp"] = True
            items.append(item)
        return {"frame": int(f), "objects": items}
    _write_lines(path, (rec(f, objs) for f, objs in frames))


def read_labeled(path) -> list:
    out = []
    for no, rec in _read_lines(path):
        try:
            objs = [(int(o["id"]), box_from_dict(o["box"])) for o in rec["objects"]]
            out.append((int(rec["frame"]), objs))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{no}: bad labeled record ({exc})") from None
    return out


def write_trajectories(path, traj):
    flags = {(f, i): True for f, rows in traj.boxes.items() for i, _, interp in rows if interp}
    write_labeled(path, traj.labeled_frames(), flags)


# ---------------------------------------------------------------------------
# poses and heatmaps

def pose_to_dict(p: Pose3D) -> dict:
    return {"joints": p.joints, "names": list(p.names)}


def read_pose(path) -> Pose3D:
    d = read_json(path)
    try:
        return Pose3D(d["joints"], tuple(d.get("names", COCO_JOINTS)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: bad pose file ({exc})") from None


def write_pose(path, p: Pose3D):
    write_json(path, pose_to_dict(p))


def write_heatmap(path, h: Heatmap3D):
    """Writes ``<path>.json`` (header) and ``<path>.bin`` (little-endian f32,
    C order over X, Y, Z)."""
    path = Path(path)
    write_json(path.with_suffix(".json"), {"dims": list(h.values.shape), "origin": h.origin,
                                           "pitch": h.pitch, "dtype": "f32le"})
    path.with_suffix(".bin").write_bytes(h.values.astype("<f4").tobytes(order="C"))


def read_heatmap(path) -> Heatmap3D:
    path = Path(path)
    header = read_json(path.with_suffix(".json"))
    try:
        dims = [int(v) for v in header["dims"]]
        origin = [float(v) for v in header["origin"]]
        pitch = float(header["pitch"])
        dtype = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: bad heatmap header ({exc})") from None
    if dtype != "f32le" or len(dims) != 3 or len(origin) != 3 or min(dims) < 1:
        raise ValueError(f"{path}: bad heatmap header")
    raw = path.with_suffix(".bin").read_bytes()
    if len(raw) != 4 * int(np.prod(dims)):
        raise ValueError(f"{path}: grid size does not match header dims {dims}")
    values = np.frombuffer(raw, dtype="<f4").astype(float).reshape(dims)
    return Heatmap3D(values, origin, pitch)
