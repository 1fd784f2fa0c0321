"""Synthetic ground truth: ellipse phantoms, coil sensitivities, acquisition."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ParameterError, ShapeError
from .kspace import fft2c, sense_expand

MIN_SIZE = 16
BLUR_SIGMA = 1.5
MAX_PHASE = np.pi / 2  # |phase| <= pi/2 gives a total range of at most pi


def _grid(h: int, w: int):
    y = np.linspace(-1.0, 1.0, h)[:, None]
    x = np.linspace(-1.0, 1.0, w)[None, :]
    return y, x


def _ellipse(y, x, cy, cx, ry, rx, angle):
    c, s = np.cos(angle), np.sin(angle)
    u = (x - cx) * c + (y - cy) * s
    v = -(x - cx) * s + (y - cy) * c
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def gen_phantom(seed: int, h: int = 64, w: int = 64, n_ellipses: int = 6) -> np.ndarray:
    """Random head-like ellipse phantom with a smooth complex phase.

    An enclosing skull ellipse is filled with a low intensity and inner
    ellipses overwrite it with intensities drawn from [0, 1]. The magnitude
    is Gaussian-blurred and scaled to a peak of 1, then multiplied by
    ``exp(i (a x + b y + c x y))``.

    Everything stays inside the circle inscribed in the frame, so rotations
    about the center do not clip the object.
    """
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ParameterError(f"phantom dimensions must be >= {MIN_SIZE}, got {h}x{w}")
    if n_ellipses < 1:
        raise ParameterError(f"n_ellipses must be >= 1, got {n_ellipses}")
    rng = np.random.default_rng(seed)
    y, x = _grid(h, w)

    skull_ry, skull_rx = rng.uniform(0.70, 0.82, size=2)
    skull_angle = rng.uniform(-0.3, 0.3)
    mag = np.zeros((h, w))
    mag[_ellipse(y, x, 0.0, 0.0, skull_ry, skull_rx, skull_angle)] = rng.uniform(0.6, 1.0)
    mag[_ellipse(y, x, 0.0, 0.0, skull_ry - 0.06, skull_rx - 0.06, skull_angle)] = rng.uniform(0.1, 0.3)
    inner = min(skull_ry, skull_rx) - 0.1
    for _ in range(n_ellipses):
        r = rng.uniform(0.0, 0.55) * inner
        phi = rng.uniform(0.0, 2 * np.pi)
        cy, cx = r * np.sin(phi), r * np.cos(phi)
        room = inner - r
        ry, rx = rng.uniform(0.08, 1.0, size=2) * max(room, 0.1)
        mag[_ellipse(y, x, cy, cx, ry, rx, rng.uniform(0, np.pi))] = rng.uniform(0.0, 1.0)

    mag = gaussian_filter(mag, BLUR_SIGMA, mode="constant")
    mag /= mag.max()
    a, b, c = rng.uniform(-MAX_PHASE / 3, MAX_PHASE / 3, size=3)
    phase = a * x + b * y + c * x * y
    return mag * np.exp(1j * phase)


def gen_coil_maps(seed: int, c: int, h: int = 64, w: int = 64) -> np.ndarray:
    """Smooth Gaussian-lobe coil sensitivities, normalized so sum_c |S_c|^2 = 1.

    Coil ``i`` sits on the ellipse through the frame edges at angle
    ``offset + 2 pi i / c``; ``offset`` and the per-coil phases are seeded.
    """
    if c < 1:
        raise ParameterError(f"coil count must be >= 1, got {c}")
    rng = np.random.default_rng(seed)
    offset = rng.uniform(0.0, 2 * np.pi)
    phases = rng.uniform(-np.pi, np.pi, size=c)
    ramps = rng.uniform(-0.5, 0.5, size=(c, 2))
    sigma = 0.5 * min(h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy0, cx0 = (h - 1) / 2, (w - 1) / 2
    maps = np.empty((c, h, w), dtype=np.complex128)
    for i in range(c):
        ang = offset + 2 * np.pi * i / c
        cy = cy0 + (h / 2) * np.sin(ang)
        cx = cx0 + (w / 2) * np.cos(ang)
        lobe = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
        ramp = ramps[i, 0] * (yy - cy0) / h + ramps[i, 1] * (xx - cx0) / w
        maps[i] = lobe * np.exp(1j * (phases[i] + np.pi * ramp))
    return maps / np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))


def forward_acquire(image: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Fully sampled multi-coil k-space ``F(S_c x)``."""
    image = np.asarray(image)
    if image.shape != maps.shape[1:]:
        raise ShapeError(f"image {image.shape} and maps {maps.shape} have different frames")
    return fft2c(sense_expand(image, maps))
