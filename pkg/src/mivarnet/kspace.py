"""Centered Fourier transforms, Cartesian sampling masks and coil combination.

All k-space arrays are centered: the DC sample of an ``H x W`` frame sits at
index ``(H // 2, W // 2)``. Transforms are orthonormal, so they preserve the
Frobenius norm. Phase-encode lines are the columns (last axis); masks select
whole columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError

#: Fraction of the maximum rss intensity below which a pixel is background.
SUPPORT_THRESHOLD = 0.05

_AXES = (-2, -1)


def fft2c(img: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2D FFT over the last two axes."""
    img = np.asarray(img)
    if img.ndim < 2 or min(img.shape[-2:]) < 2:
        raise ShapeError(f"fft2c needs at least a 2x2 frame, got shape {img.shape}")
    shifted = np.fft.ifftshift(img, axes=_AXES)
    return np.fft.fftshift(np.fft.fft2(shifted, axes=_AXES, norm="ortho"), axes=_AXES)


def ifft2c(k: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    k = np.asarray(k)
    if k.ndim < 2 or min(k.shape[-2:]) < 2:
        raise ShapeError(f"ifft2c needs at least a 2x2 frame, got shape {k.shape}")
    shifted = np.fft.ifftshift(k, axes=_AXES)
    return np.fft.fftshift(np.fft.ifft2(shifted, axes=_AXES, norm="ortho"), axes=_AXES)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def center_block(w: int, center_fraction: float) -> slice:
    """Column slice of the fully sampled calibration block around DC."""
    n = round_half_up(center_fraction * w)
    start = w // 2 - n // 2
    return slice(start, start + n)


@dataclass(frozen=True)
class SamplingMask:
    """Column mask over the phase-encode direction.

    ``columns`` is a boolean vector of length ``W``; :meth:`expand` replicates
    it over rows.
    """

    columns: np.ndarray
    acceleration: int
    center_fraction: float

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=bool)
        if cols.ndim != 1:
            raise ShapeError("mask columns must be a 1-D vector")
        object.__setattr__(self, "columns", cols)

    @property
    def width(self) -> int:
        return self.columns.shape[0]

    def expand(self, h: int) -> np.ndarray:
        return np.broadcast_to(self.columns[None, :], (h, self.width)).astype(np.float64)

    def sampled_fraction(self) -> float:
        return float(self.columns.mean())


def make_equispaced_mask(w: int, accel: int, center_fraction: float = 0.08, seed: int = 0) -> SamplingMask:
    if accel < 1 or int(accel) != accel:
        raise ParameterError(f"acceleration must be an integer >= 1, got {accel}")
    if not 0 < center_fraction < 1:
        raise ParameterError(f"center_fraction must lie in (0, 1), got {center_fraction}")
    block = center_block(w, center_fraction)
    if block.stop - block.start > w or block.start < 0:
        raise ParameterError(f"center block of {block.stop - block.start} columns exceeds width {w}")
    accel = int(accel)
    offset = int(np.random.default_rng(seed).integers(accel))
    cols = np.zeros(w, dtype=bool)
    cols[offset::accel] = True
    cols[block] = True
    return SamplingMask(cols, accel, float(center_fraction))


def apply_mask(k: np.ndarray, mask: SamplingMask) -> np.ndarray:
    """Zero every unsampled column of ``k``."""
    k = np.asarray(k)
    if k.shape[-1] != mask.width:
        raise ShapeError(f"k-space width {k.shape[-1]} does not match mask width {mask.width}")
    return np.where(mask.columns, k, 0)


def rss_combine(imgs: np.ndarray) -> np.ndarray:
    """Root sum of squares over the coil axis (axis 0)."""
    imgs = np.asarray(imgs)
    if imgs.ndim != 3 or imgs.shape[0] < 1:
        raise ShapeError(f"expected a (C, H, W) coil stack, got shape {imgs.shape}")
    return np.sqrt(np.sum(np.abs(imgs) ** 2, axis=0))


def _check_maps(spatial: tuple, maps: np.ndarray):
    if maps.ndim != 3 or maps.shape[1:] != tuple(spatial):
        raise ShapeError(f"maps of shape {maps.shape} do not match image frame {tuple(spatial)}")


def sense_combine(imgs: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Coil combination ``sum_c conj(S_c) * y_c``; adjoint of :func:`sense_expand`."""
    imgs = np.asarray(imgs)
    maps = np.asarray(maps)
    _check_maps(imgs.shape[-2:], maps)
    if imgs.shape != maps.shape:
        raise ShapeError(f"coil images {imgs.shape} and maps {maps.shape} differ")
    return np.sum(np.conj(maps) * imgs, axis=0)


def sense_expand(img: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Per-coil weighting ``S_c * x``."""
    img = np.asarray(img)
    maps = np.asarray(maps)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {img.shape}")
    _check_maps(img.shape, maps)
    return maps * img[None]


def estimate_sens_maps(k: np.ndarray, center_fraction: float = 0.08) -> np.ndarray:
    """Estimate sensitivity maps from the fully sampled center of k-space.

    The calibration block is inverse transformed and each coil image is
    divided by the rss image. Pixels whose rss falls below
    ``SUPPORT_THRESHOLD`` of the maximum are zeroed in every map.
    """
    k = np.asarray(k)
    if k.ndim != 3:
        raise ShapeError(f"expected (C, H, W) k-space, got shape {k.shape}")
    calib = np.zeros_like(k, dtype=np.complex128)
    block = center_block(k.shape[-1], center_fraction)
    calib[..., block] = k[..., block]
    low = ifft2c(calib)
    rss = rss_combine(low)
    peak = rss.max()
    if peak == 0:
        return np.zeros_like(calib)
    support = rss > SUPPORT_THRESHOLD * peak
    if k.shape[0] == 1:
        return np.where(support, 1.0 + 0j, 0j)[None]
    safe = np.where(support, rss, 1.0)
    maps = np.where(support, low / safe, 0)
    norm = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return np.where(support, maps / np.where(support, norm, 1.0), 0)
