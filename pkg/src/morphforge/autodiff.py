"""Minimal forward-mode differentiation for the encoder forward passes.

A :class:`Dual` carries a value and a batch of tangents: ``tan`` has shape
``(k,) + val.shape``, one tangent per seed direction. The helper functions
here accept either plain arrays or duals, so one forward implementation
serves both evaluation and Jacobian-vector products.

Only the operations the encoders need are supported.
"""

from __future__ import annotations

import numpy as np


class Dual:
    __array_priority__ = 1000  # make ndarray @ Dual defer to __rmatmul__

    def __init__(self, val, tan):
        self.val = np.asarray(val)
        self.tan = np.asarray(tan)
        if self.tan.shape[1:] != self.val.shape:
            raise ValueError(f"tangent shape {self.tan.shape} does not match value {self.val.shape}")

    @property
    def k(self):
        return self.tan.shape[0]

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    def __len__(self):
        return len(self.val)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        v = self.val + value_of(other)
        return Dual(v, _lift(self, v.ndim) + _lift_other(other, self.k, v.ndim))

    __radd__ = __add__

    def __sub__(self, other):
        v = self.val - value_of(other)
        return Dual(v, _lift(self, v.ndim) - _lift_other(other, self.k, v.ndim))

    def __rsub__(self, other):
        v = value_of(other) - self.val
        return Dual(v, _lift_other(other, self.k, v.ndim) - _lift(self, v.ndim))

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __mul__(self, other):
        ov = value_of(other)
        v = self.val * ov
        t = _lift(self, v.ndim) * ov
        if isinstance(other, Dual):
            t = t + self.val * _lift(other, v.ndim)
        return Dual(v, np.broadcast_to(t, (self.k,) + v.shape))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * reciprocal(other)
        v = self.val / other
        return Dual(v, np.broadcast_to(_lift(self, v.ndim) / other, (self.k,) + v.shape))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __matmul__(self, other):
        ov = value_of(other)
        v = self.val @ ov
        t = _lift(self, v.ndim) @ ov
        if isinstance(other, Dual):
            t = t + self.val @ _lift(other, v.ndim)
        return Dual(v, np.broadcast_to(t, (self.k,) + v.shape))

    def __rmatmul__(self, other):
        v = other @ self.val
        return Dual(v, np.broadcast_to(other @ _lift(self, v.ndim), (self.k,) + v.shape))

    # shape ops --------------------------------------------------------------
    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Dual(self.val[idx], self.tan[(slice(None),) + idx])

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        v = self.val.reshape(shape)
        return Dual(v, self.tan.reshape((self.k,) + v.shape))

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], tuple):
            axes = axes[0]
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        axes = tuple(a % self.ndim for a in axes)
        return Dual(self.val.transpose(axes), self.tan.transpose((0,) + tuple(a + 1 for a in axes)))

    @property
    def T(self):
        return self.transpose()

    def swapaxes(self, a, b):
        a, b = a % self.ndim, b % self.ndim
        return Dual(self.val.swapaxes(a, b), self.tan.swapaxes(a + 1, b + 1))

    def sum(self, axis=None, keepdims=False):
        if axis is None:
            axes = tuple(range(self.ndim))
        else:
            axes = tuple(a % self.ndim for a in np.atleast_1d(axis))
        return Dual(
            self.val.sum(axis=axes, keepdims=keepdims),
            self.tan.sum(axis=tuple(a + 1 for a in axes), keepdims=keepdims),
        )

    def mean(self, axis=None, keepdims=False):
        s = self.sum(axis, keepdims)
        return s * (s.val.size / self.val.size)


def value_of(x):
    return x.val if isinstance(x, Dual) else np.asarray(x)


def _lift(d: Dual, ndim):
    """Tangent of ``d`` reshaped to broadcast against a rank-``ndim`` result."""
    pad = ndim - d.ndim
    if pad <= 0:
        return d.tan
    return d.tan.reshape((d.k,) + (1,) * pad + d.val.shape)


def _lift_other(x, k, ndim):
    if isinstance(x, Dual):
        return _lift(x, ndim)
    return 0.0


def _unary(x, f, df):
    if not isinstance(x, Dual):
        return f(np.asarray(x))
    return Dual(f(x.val), df(x.val) * x.tan)


def exp(x):
    return _unary(x, np.exp, np.exp)


def sqrt(x):
    return _unary(x, np.sqrt, lambda v: 0.5 / np.sqrt(v))


def reciprocal(x):
    return _unary(x, lambda v: 1.0 / v, lambda v: -1.0 / (v * v))


def elu(x):
    def f(v):
        return np.where(v > 0, v, np.expm1(np.minimum(v, 0.0)))

    def df(v):
        return np.where(v > 0, 1.0, np.exp(np.minimum(v, 0.0)))

    return _unary(x, f, df)


def relu(x):
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda v: (v > 0).astype(v.dtype))


def leaky_relu(x, slope=0.01):
    return _unary(x, lambda v: np.where(v > 0, v, slope * v), lambda v: np.where(v > 0, 1.0, slope))


def where(cond, x, y):
    cond = np.asarray(cond)
    v = np.where(cond, value_of(x), value_of(y))
    if not isinstance(x, Dual) and not isinstance(y, Dual):
        return v
    k = (x if isinstance(x, Dual) else y).k
    tx = _lift(x, v.ndim) if isinstance(x, Dual) else 0.0
    ty = _lift(y, v.ndim) if isinstance(y, Dual) else 0.0
    return Dual(v, np.broadcast_to(np.where(cond, tx, ty), (k,) + v.shape))


def concatenate(parts, axis=-1):
    if not any(isinstance(p, Dual) for p in parts):
        return np.concatenate([np.asarray(p) for p in parts], axis=axis)
    k = next(p.k for p in parts if isinstance(p, Dual))
    vals = [value_of(p) for p in parts]
    v = np.concatenate(vals, axis=axis)
    ax = axis % v.ndim + 1
    tans = [p.tan if isinstance(p, Dual) else np.zeros((k,) + pv.shape) for p, pv in zip(parts, vals)]
    return Dual(v, np.concatenate(tans, axis=ax))


def jacobian(f, x):
    """Full Jacobian of ``f`` at ``x`` by forward mode, shape (out.size, x.size)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    seed = Dual(x, np.eye(n).reshape((n,) + x.shape))
    out = f(seed)
    if not isinstance(out, Dual):
        return np.zeros((np.asarray(out).size, n))
    return out.tan.reshape(n, -1).T
