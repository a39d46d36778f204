"""Run-time knobs for tracking and evaluation, round-trippable through JSON."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .regain import FieldModel


@dataclass
class RunConfig:
    alpha: float = 0.5
    k: int = 5
    bank_capacity: int = 60
    bank_window: int = 30
    min_score: float = 0.2
    regain_threshold: float = 0.5
    r0: float = 1.0
    v_max: float = 10.0
    occlusion_threshold: float = 0.3
    hit_confirm: int = 2
    max_broken_age: int = 100
    metric_gate: float = 0.25
    confidence_gate: float = 0.0
    use_regain: bool = True
    use_geometry_constraint: bool = True
    field_x_min: float = 0.0
    field_x_max: float = 28.0
    field_y_min: float = 0.0
    field_y_max: float = 15.0
    field_margin: float = 1.0
    frame_rate: float = 10.0

    def __post_init__(self):
        for name in ("alpha", "min_score", "occlusion_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not -1.0 <= self.regain_threshold <= 1.0:
            raise ValueError("regain_threshold must lie in [-1, 1]")
        for name in ("k", "bank_capacity", "bank_window", "hit_confirm", "max_broken_age"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.k > self.bank_capacity:
            raise ValueError("k cannot exceed bank_capacity")
        if not (self.r0 >= 0 and self.v_max >= 0 and self.frame_rate > 0):
            raise ValueError("r0, v_max must be >= 0 and frame_rate > 0")
        self.field  # validates bounds

    @property
    def dt(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def field(self) -> FieldModel:
        return FieldModel(self.field_x_min, self.field_x_max, self.field_y_min,
                          self.field_y_max, self.field_margin)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
