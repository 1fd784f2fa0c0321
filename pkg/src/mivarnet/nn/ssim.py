"""Differentiable structural similarity with a uniform window."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ParameterError, ShapeError
from .tensor import Tensor, _accum, _node, as_tensor, mean


@dataclass(frozen=True)
class SsimParams:
    window: int = 7
    data_range: float = 1.0
    k1: float = 0.01
    k2: float = 0.03

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


def _box_valid(a: np.ndarray, n: int) -> np.ndarray:
    return sliding_window_view(a, (n, n)).sum(axis=(-1, -2)) / (n * n)


def box_mean(x, n: int) -> Tensor:
    """Mean over every fully contained ``n x n`` window (valid mode)."""
    x = as_tensor(x)

    def backward(g):
        _accum(x, _box_valid(np.pad(g, n - 1), n))

    return _node(_box_valid(x.value, n), (x,), backward)


def ssim(x, y, params: SsimParams = SsimParams()):
    """Mean local SSIM of two real images.

    Returns a scalar :class:`Tensor` when either input is a Tensor, otherwise
    a float.
    """
    as_float = not isinstance(x, Tensor) and not isinstance(y, Tensor)
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape or x.value.ndim != 2:
        raise ShapeError(f"ssim needs two equal 2-D images, got {x.shape} and {y.shape}")
    n = params.window
    if n > min(x.shape):
        raise ParameterError(f"window {n} does not fit an image of shape {x.shape}")
    c1, c2 = params.c1, params.c2
    mu_x, mu_y = box_mean(x, n), box_mean(y, n)
    mu_xx, mu_yy, mu_xy = mu_x * mu_x, mu_y * mu_y, mu_x * mu_y
    var_x = box_mean(x * x, n) - mu_xx
    var_y = box_mean(y * y, n) - mu_yy
    cov = box_mean(x * y, n) - mu_xy
    num = (2.0 * mu_xy + c1) * (2.0 * cov + c2)
    den = (mu_xx + mu_yy + c1) * (var_x + var_y + c2)
    out = mean(num / den)
    return float(out.value) if as_float else out


def ssim_loss(pred, target, params: SsimParams = SsimParams()) -> Tensor:
    return 1.0 - ssim(as_tensor(pred), target, params)
