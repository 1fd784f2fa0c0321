"""Convolution, activation and resampling layers for single ``(C, H, W)`` examples."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, _accum, _node, as_tensor, leaky_relu, relu


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Columns in ``(Cin * kh * kw, H * W)`` layout."""
    cin, h, w = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    cols = np.empty((cin, kh, kw, h, w))
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = padded[:, i : i + h, j : j + w]
    return cols.reshape(cin * kh * kw, h * w)


def _col2im(cols: np.ndarray, shape: tuple, kh: int, kw: int) -> np.ndarray:
    cin, h, w = shape
    ph, pw = kh // 2, kw // 2
    cols = cols.reshape(cin, kh, kw, h, w)
    out = np.zeros((cin, h + 2 * ph, w + 2 * pw))
    for i in range(kh):
        for j in range(kw):
            out[:, i : i + h, j : j + w] += cols[:, i, j]
    return out[:, ph : ph + h, pw : pw + w]


def conv2d(x, kernel, bias=None) -> Tensor:
    """Same-padded stride-1 cross-correlation of ``(Cin, H, W)`` with ``(Cout, Cin, kh, kw)``."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    cout, cin, kh, kw = kernel.shape
    if x.value.ndim != 3 or x.shape[0] != cin:
        raise ShapeError(f"input {x.shape} does not match kernel {kernel.shape}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError("kernel sizes must be odd")
    _, h, w = x.shape
    if kh == 1 and kw == 1:
        cols = x.value.reshape(cin, h * w)
    else:
        cols = _im2col(x.value, kh, kw)
    kmat = kernel.value.reshape(cout, -1)
    out = kmat @ cols
    parents = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (cout,):
            raise ShapeError(f"bias shape {bias.shape} does not match {cout} output channels")
        out += bias.value[:, None]
        parents.append(bias)
    value = out.reshape(cout, h, w)

    def backward(g):
        gm = g.reshape(cout, h * w)
        if kernel.requires_grad:
            _accum(kernel, (gm @ cols.T).reshape(kernel.shape))
        if bias is not None and bias.requires_grad:
            _accum(bias, gm.sum(axis=1))
        if x.requires_grad:
            dcols = kmat.T @ gm
            if kh == 1 and kw == 1:
                _accum(x, dcols.reshape(cin, h, w))
            else:
                _accum(x, _col2im(dcols, x.shape, kh, kw))

    return _node(value, parents, backward)


def avgpool2(x) -> Tensor:
    x = as_tensor(x)
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avgpool2 needs even spatial dims, got {h}x{w}")
    value = x.value.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))

    def backward(g):
        _accum(x, np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) / 4.0)

    return _node(value, (x,), backward)


def upsample_nearest2(x) -> Tensor:
    x = as_tensor(x)
    c, h, w = x.shape
    value = np.repeat(np.repeat(x.value, 2, axis=1), 2, axis=2)

    def backward(g):
        _accum(x, g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)))

    return _node(value, (x,), backward)


def resample(x, mode: str) -> Tensor:
    if mode == "avgpool2":
        return avgpool2(x)
    if mode == "upsample_nearest2":
        return upsample_nearest2(x)
    raise ValueError(f"unknown resample mode {mode!r}")


def activation(x, kind: str = "leaky_relu", slope: float = 0.2) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    raise ValueError(f"unknown activation {kind!r}")


class Module:
    """Parameter container; subclasses assign Tensors, Modules or lists of Modules."""

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            path = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int = 3, rng=None, zero_init: bool = False, bias_init: float = 0.0):
        if zero_init:
            w = np.zeros((cout, cin, k, k))
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            w = rng.normal(0.0, np.sqrt(2.0 / (cin * k * k)), size=(cout, cin, k, k))
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.full(cout, float(bias_init)), requires_grad=True)

    def __call__(self, x) -> Tensor:
        return conv2d(x, self.weight, self.bias)
