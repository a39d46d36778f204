"""Player statistics and position heatmaps from a single trajectory."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .regain import FieldModel

SPRINT_SPEED = 6.0  # m/s, strictly above
JOG_SPEED = 1.0     # m/s, strictly below


@dataclass
class PlayerStats:
    playing_time: float = 0.0
    running_distance: float = 0.0
    sprint_distance: float = 0.0
    sprint_time: float = 0.0
    jogging_time: float = 0.0
    top_speed: float = 0.0

    def __add__(self, other: "PlayerStats") -> "PlayerStats":
        return PlayerStats(
            self.playing_time + other.playing_time,
            self.running_distance + other.running_distance,
            self.sprint_distance + other.sprint_distance,
            self.sprint_time + other.sprint_time,
            self.jogging_time + other.jogging_time,
            max(self.top_speed, other.top_speed))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_table(self, player_id=None) -> str:
        """Two-row aligned layout: time and distances, then sprint/jog/top speed."""
        minutes, seconds = divmod(self.playing_time, 60.0)
        label = "" if player_id is None else str(player_id)
        w = max(len(label), 9)
        head1 = ["playing time", "running distance/m", "sprint distance/m"]
        val1 = [f"{int(minutes)} min {seconds:.0f} s", f"{self.running_distance:.1f}",
                f"{self.sprint_distance:.1f}"]
        head2 = ["sprint time/s", "jogging time/s", "top speed/m/s"]
        val2 = [f"{self.sprint_time:.1f}", f"{self.jogging_time:.1f}", f"{self.top_speed:.1f}"]
        cols = [max(len(a), len(b), len(c), len(d)) for a, b, c, d in zip(head1, val1, head2, val2)]

        def line(first, cells):
            return first.ljust(w) + " | " + " | ".join(c.rjust(n) for c, n in zip(cells, cols))

        return "\n".join([line("Player", head1), line(label, val1),
                          line("", head2), line("", val2)]) + "\n"


def speeds(trajectory, dt: float, window: int = 5) -> np.ndarray:
    """Per-frame speed: central differences (one-sided at the ends) smoothed
    by a centred moving average of odd width; edge windows shrink."""
    pos = np.asarray(trajectory, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    if len(pos) < 2:
        return np.zeros(0)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    vel = np.gradient(pos, dt, axis=0)
    raw = np.linalg.norm(vel, axis=1)
    half = window // 2
    csum = np.concatenate([[0.0], np.cumsum(raw)])
    n = len(raw)
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def stats(trajectory, dt: float, window: int = 5) -> PlayerStats:
    """Statistics of a contiguous trajectory sampled every ``dt`` seconds.

    Each interval between consecutive samples contributes ``dt`` of playing
    time and its segment length of distance; it counts as sprinting or
    jogging by the mean smoothed speed of its two endpoints.
    """
    pos = np.asarray(trajectory, dtype=float)
    if len(pos) < 2:
        return PlayerStats()
    sp = speeds(pos, dt, window)
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=1)
    interval_speed = 0.5 * (sp[1:] + sp[:-1])
    sprint = interval_speed > SPRINT_SPEED
    jog = interval_speed < JOG_SPEED
    return PlayerStats(
        playing_time=len(seg) * dt,
        running_distance=float(seg.sum()),
        sprint_distance=float(seg[sprint].sum()),
        sprint_time=float(sprint.sum() * dt),
        jogging_time=float(jog.sum() * dt),
        top_speed=float(sp.max()))


@dataclass
class HeatmapGrid:
    counts: np.ndarray
    cell: float
    origin: tuple
    spill: int = 0

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        """Rows run from the top (largest y) to the bottom of the field."""
        return "\n".join(",".join(str(int(v)) for v in row) for row in self.counts[::-1]) + "\n"

    def to_pgm(self) -> bytes:
        """Plain (P2) greyscale image; brighter means more frames."""
        h, w = self.counts.shape
        peak = self.counts.max()
        img = np.zeros_like(self.counts) if peak == 0 else \
            np.round(self.counts * 255.0 / peak).astype(int)
        lines = ["P2", f"{w} {h}", "255"]
        lines += [" ".join(str(int(v)) for v in row) for row in img[::-1]]
        return ("\n".join(lines) + "\n").encode("ascii")


def heatmap(trajectory, field: FieldModel, cell: float = 0.5) -> HeatmapGrid:
    if not cell > 0:
        raise ValueError("cell size must be positive")
    nx = max(1, math.ceil((field.x_max - field.x_min) / cell - 1e-9))
    ny = max(1, math.ceil((field.y_max - field.y_min) / cell - 1e-9))
    counts = np.zeros((ny, nx), dtype=np.int64)
    spill = 0
    pts = np.asarray(trajectory, dtype=float)
    if pts.size == 0:
        pts = np.zeros((0, 2))
    for p in pts:
        if not field.contains(p):
            spill += 1
            continue
        ix = min(int((p[0] - field.x_min) // cell), nx - 1)
        iy = min(int((p[1] - field.y_min) // cell), ny - 1)
        counts[iy, ix] += 1
    return HeatmapGrid(counts, cell, (field.x_min, field.y_min), spill)
