"""Experiment configuration with up-front validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .kspace import round_half_up
from .motion import MAX_EVENTS, MAX_ROT, MAX_TRANS
from .phantom import MIN_SIZE

MODES = ("varnet", "varnet_mi")


@dataclass(frozen=True)
class MotionConfig:
    max_events: int = MAX_EVENTS
    max_trans_px: float = MAX_TRANS
    max_rot_deg: float = MAX_ROT


@dataclass(frozen=True)
class ExperimentConfig:
    image_size: int = 64
    coils: int = 4
    accel: int = 4
    center_fraction: float = 0.08
    cascades: int = 4
    channels: int = 16
    midcp_channels: int = 8
    n_ellipses: int = 6
    lr: float = 1e-3
    steps: int = 2000
    seed: int = 0
    mode: str = "varnet_mi"
    motion: MotionConfig = field(default_factory=MotionConfig)

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.image_size < MIN_SIZE or self.image_size % 2:
            problems.append(f"image_size must be even and >= {MIN_SIZE}")
        if self.coils < 1:
            problems.append("coils must be >= 1")
        if self.accel < 1 or int(self.accel) != self.accel:
            problems.append("accel must be an integer >= 1")
        if not 0 < self.center_fraction < 1:
            problems.append("center_fraction must lie in (0, 1)")
        elif round_half_up(self.center_fraction * self.image_size) < 1:
            problems.append("center_fraction selects no calibration columns")
        if self.cascades < 1:
            problems.append("cascades must be >= 1")
        if self.channels < 1 or self.midcp_channels < 1:
            problems.append("channel counts must be >= 1")
        if self.n_ellipses < 1:
            problems.append("n_ellipses must be >= 1")
        if not self.lr > 0:
            problems.append("lr must be positive")
        if self.steps < 1:
            problems.append("steps must be >= 1")
        if self.seed < 0:
            problems.append("seed must be non-negative")
        if self.mode not in MODES:
            problems.append(f"mode must be one of {MODES}")
        m = self.motion
        if not 0 <= m.max_events <= MAX_EVENTS:
            problems.append(f"motion.max_events must lie in [0, {MAX_EVENTS}]")
        if not 0 <= m.max_trans_px <= MAX_TRANS:
            problems.append(f"motion.max_trans_px must lie in [0, {MAX_TRANS}]")
        if not 0 <= m.max_rot_deg <= MAX_ROT:
            problems.append(f"motion.max_rot_deg must lie in [0, {MAX_ROT}]")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        motion = d.pop("motion", {})
        mknown = {f.name for f in fields(MotionConfig)}
        if set(motion) - mknown:
            raise ConfigError(f"unknown motion keys: {sorted(set(motion) - mknown)}")
        try:
            return cls(motion=MotionConfig(**motion), **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig.from_dict(data)
