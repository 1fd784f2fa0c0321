"""Rigid in-plane motion: trajectory sampling and line-wise k-space corruption.

A trajectory is a list of step-wise pose changes. Phase-encode columns are
acquired left to right; the pose at column ``j`` is the last event whose
``start_line`` is ``<= j`` (the identity before the first event). Coil
sensitivities stay fixed while the object moves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError
from .kspace import fft2c, ifft2c, sense_expand

MAX_EVENTS = 16
MAX_TRANS = 10.0
MAX_ROT = 10.0


@dataclass(frozen=True)
class MotionEvent:
    start_line: int
    dx: float
    dy: float
    theta: float

    def to_dict(self) -> dict:
        return {"start_line": self.start_line, "dx": self.dx, "dy": self.dy, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "MotionEvent":
        return cls(int(d["start_line"]), float(d["dx"]), float(d["dy"]), float(d["theta"]))


@dataclass(frozen=True)
class MotionTrajectory:
    n_lines: int
    events: tuple[MotionEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        if len(events) > MAX_EVENTS:
            raise ParameterError(f"at most {MAX_EVENTS} motion events allowed, got {len(events)}")
        starts = [e.start_line for e in events]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ParameterError(f"event start lines must be strictly increasing: {starts}")
        # start_line 0 is accepted for hand-built trajectories (whole acquisition moved)
        if starts and (starts[0] < 0 or starts[-1] >= self.n_lines):
            raise ParameterError(f"event start lines must lie in [0, {self.n_lines})")
        for e in events:
            if abs(e.dx) > MAX_TRANS or abs(e.dy) > MAX_TRANS or abs(e.theta) > MAX_ROT:
                raise ParameterError(f"motion event out of bounds: {e}")

    @property
    def label(self) -> bool:
        return len(self.events) > 0

    def segments(self):
        """Yield ``(start, stop, dx, dy, theta)`` for every pose segment."""
        bounds = [0] + [e.start_line for e in self.events] + [self.n_lines]
        poses = [(0.0, 0.0, 0.0)] + [(e.dx, e.dy, e.theta) for e in self.events]
        for (a, b), pose in zip(zip(bounds, bounds[1:]), poses):
            if b > a:
                yield (a, b, *pose)

    def to_dict(self) -> dict:
        return {"n_lines": self.n_lines, "events": [e.to_dict() for e in self.events]}

    @classmethod
    def from_dict(cls, d: dict) -> "MotionTrajectory":
        return cls(int(d["n_lines"]), tuple(MotionEvent.from_dict(e) for e in d["events"]))


def sample_trajectory(
    seed,
    n_lines: int,
    max_events: int = MAX_EVENTS,
    max_trans: float = MAX_TRANS,
    max_rot: float = MAX_ROT,
    n_events: int | None = None,
) -> MotionTrajectory:
    """Draw a random step-wise rigid trajectory.

    The event count is uniform on ``0..max_events`` unless ``n_events`` is
    given. ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n_lines < 2:
        raise ParameterError(f"n_lines must be >= 2, got {n_lines}")
    if not 0 <= max_events <= MAX_EVENTS:
        raise ParameterError(f"max_events must lie in [0, {MAX_EVENTS}]")
    if not 0 <= max_trans <= MAX_TRANS or not 0 <= max_rot <= MAX_ROT:
        raise ParameterError("motion amplitude bounds exceed the supported range")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n_events is None:
        n_events = int(rng.integers(0, max_events + 1))
    n_events = min(n_events, n_lines - 1)
    starts = np.sort(rng.choice(np.arange(1, n_lines), size=n_events, replace=False))
    shifts = rng.uniform(-max_trans, max_trans, size=(n_events, 2))
    angles = rng.uniform(-max_rot, max_rot, size=n_events)
    events = tuple(
        MotionEvent(int(s), float(d[0]), float(d[1]), float(a)) for s, d, a in zip(starts, shifts, angles)
    )
    return MotionTrajectory(n_lines, events)


def _bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = img.shape
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    fy = ys - y0
    fx = xs - x0
    out = np.zeros(ys.shape, dtype=np.result_type(img, np.float64))
    for oy, wy in ((0, 1 - fy), (1, fy)):
        for ox, wx in ((0, 1 - fx), (1, fx)):
            yi, xi = y0 + oy, x0 + ox
            inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
            vals = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += np.where(inside, wy * wx * vals, 0)
    return out


def rotate(img: np.ndarray, theta: float) -> np.ndarray:
    """Rotate counterclockwise (as displayed) by ``theta`` degrees about the frame center.

    Bilinear interpolation; samples from outside the frame are zero.
    """
    if theta == 0:
        return np.array(img, copy=True)
    h, w = img.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    t = np.deg2rad(theta)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # inverse map: output pixel -> source location
    ys = cy + np.cos(t) * (yy - cy) + np.sin(t) * (xx - cx)
    xs = cx - np.sin(t) * (yy - cy) + np.cos(t) * (xx - cx)
    return _bilinear(img, ys, xs)


def phase_ramp(h: int, w: int, dx: float, dy: float) -> np.ndarray:
    """Centered k-space factor that circularly shifts an image by ``(dx, dy)``."""
    ky = (np.arange(h) - h // 2)[:, None]
    kx = (np.arange(w) - w // 2)[None, :]
    return np.exp(-2j * np.pi * (kx * dx / w + ky * dy / h))


def translate(img: np.ndarray, dx: float, dy: float) -> np.ndarray:
    if dx == 0 and dy == 0:
        return np.array(img, copy=True)
    h, w = img.shape
    return ifft2c(fft2c(img) * phase_ramp(h, w, dx, dy))


def rigid_transform(img: np.ndarray, dx: float, dy: float, theta: float) -> np.ndarray:
    """Rotate (bilinear, image domain) then translate (exact, k-space phase ramp)."""
    if not all(np.isfinite(v) for v in (dx, dy, theta)):
        raise ParameterError("motion parameters must be finite")
    img = np.asarray(img)
    return translate(rotate(img, theta), dx, dy)


def corrupt_kspace(image: np.ndarray, maps: np.ndarray, traj: MotionTrajectory) -> np.ndarray:
    """Splice the multi-coil k-space of each pose into its column segment."""
    image = np.asarray(image)
    if image.shape != maps.shape[1:]:
        raise ShapeError(f"image {image.shape} and maps {maps.shape} have different frames")
    if traj.n_lines != image.shape[-1]:
        raise ShapeError(f"trajectory covers {traj.n_lines} lines, image has {image.shape[-1]} columns")
    out = np.empty(maps.shape, dtype=np.complex128)
    for start, stop, dx, dy, theta in traj.segments():
        moved = rigid_transform(image, dx, dy, theta)
        out[..., start:stop] = fft2c(sense_expand(moved, maps))[..., start:stop]
    return out
