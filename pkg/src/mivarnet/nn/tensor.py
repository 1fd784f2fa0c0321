"""A small reverse-mode autodiff tensor over numpy arrays.

Values may be real or complex. For a real loss ``L`` and a complex node
``z`` the stored gradient is ``dL/dRe(z) + 1j * dL/dIm(z)``. With that
convention a complex-linear map ``y = A z`` backpropagates as
``grad_z = A^H grad_y``, and the gradient of a real node is the real part of
whatever flows into it.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .. import kspace as ks


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value)
        if not (np.iscomplexobj(self.value) or self.value.dtype == np.float64):
            self.value = self.value.astype(np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.value.dtype}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate gradients into every node reachable from ``self``."""
        if grad is None:
            if self.value.size != 1:
                raise ShapeError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.value)
        order = _topological(self)
        self.grad = _as_like(self, grad) if self.grad is None else self.grad + _as_like(self, grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # intermediate gradients are not needed once propagated
                    node.grad = None if node is not self else node.grad

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)


def _topological(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _as_like(t: Tensor, g):
    g = np.asarray(g)
    return g if t.is_complex else np.real(g)


def _accum(t: Tensor, g):
    if not t.requires_grad:
        return
    g = _as_like(t, g)
    t.grad = g.copy() if t.grad is None else t.grad + g


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward) -> Tensor:
    out = Tensor(value)
    live = tuple(p for p in parents if p.requires_grad)
    if live:
        out.requires_grad = True
        out._parents = live
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise arithmetic ---------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _node(a.value + b.value, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, -_unbroadcast(g, b.shape))

    return _node(a.value - b.value, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(np.conj(b.value) * g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.conj(a.value) * g, b.shape))

    return _node(a.value * b.value, (a, b), backward)


def div(a, b) -> Tensor:
    """Elementwise quotient; the divisor must be real."""
    a, b = as_tensor(a), as_tensor(b)
    if b.is_complex:
        raise TypeError("div supports real divisors only")
    q = a.value / b.value

    def backward(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-np.real(np.conj(q) * g) / b.value, b.shape))

    return _node(q, (a, b), backward)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape))

    return _node(a.value.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.value.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g / n, a.shape))

    return _node(a.value.sum(axis=axis, keepdims=keepdims) / n, (a,), backward)


# nonlinearities -------------------------------------------------------------


def relu(a) -> Tensor:
    a = as_tensor(a)
    on = a.value > 0
    return _node(np.where(on, a.value, 0.0), (a,), lambda g: _accum(a, g * on))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.value > 0, 1.0, slope)
    return _node(a.value * scale, (a,), lambda g: _accum(a, g * scale))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    v = a.value
    return _node(np.logaddexp(0.0, v), (a,), lambda g: _accum(a, g / (1.0 + np.exp(-v))))


def log1p(a) -> Tensor:
    a = as_tensor(a)
    return _node(np.log1p(a.value), (a,), lambda g: _accum(a, g / (1.0 + a.value)))


def cabs(a) -> Tensor:
    """Magnitude of a complex tensor; the gradient at 0 is taken as 0."""
    a = as_tensor(a)
    mag = np.abs(a.value)
    safe = np.where(mag > 0, mag, 1.0)

    def backward(g):
        _accum(a, np.where(mag > 0, g * a.value / safe, 0.0))

    return _node(mag, (a,), backward)


def rss(a) -> Tensor:
    """Root sum of squares over axis 0 (coils)."""
    a = as_tensor(a)
    r = np.sqrt(np.sum(np.abs(a.value) ** 2, axis=0))
    safe = np.where(r > 0, r, 1.0)

    def backward(g):
        _accum(a, np.where(r > 0, g / safe, 0.0)[None] * a.value)

    return _node(r, (a,), backward)


# shape plumbing -------------------------------------------------------------


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, sizes, axis=axis)):
            _accum(t, part)

    return _node(np.concatenate([t.value for t in tensors], axis=axis), tensors, backward)


def to_channels(z) -> Tensor:
    """Complex ``(H, W)`` image to a real ``(2, H, W)`` stack (real, imaginary)."""
    z = as_tensor(z)
    return _node(np.stack([z.value.real, z.value.imag]), (z,), lambda g: _accum(z, g[0] + 1j * g[1]))


def from_channels(x) -> Tensor:
    """Inverse of :func:`to_channels`."""
    x = as_tensor(x)
    if x.shape[0] != 2:
        raise ShapeError(f"expected 2 channels, got {x.shape[0]}")
    return _node(x.value[0] + 1j * x.value[1], (x,), lambda g: _accum(x, np.stack([g.real, g.imag])))


# MRI operators ------------------------------------------------------------


def fft2c(a) -> Tensor:
    a = as_tensor(a)
    return _node(ks.fft2c(a.value), (a,), lambda g: _accum(a, ks.ifft2c(g)))


def ifft2c(a) -> Tensor:
    a = as_tensor(a)
    return _node(ks.ifft2c(a.value), (a,), lambda g: _accum(a, ks.fft2c(g)))


def sense_expand(x, maps: np.ndarray) -> Tensor:
    x = as_tensor(x)
    return _node(ks.sense_expand(x.value, maps), (x,), lambda g: _accum(x, ks.sense_combine(g, maps)))


def sense_combine(y, maps: np.ndarray) -> Tensor:
    y = as_tensor(y)
    return _node(ks.sense_combine(y.value, maps), (y,), lambda g: _accum(y, ks.sense_expand(g, maps)))
