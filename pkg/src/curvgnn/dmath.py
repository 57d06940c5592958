"""Forward-mode automatic differentiation over numpy arrays.

A :class:`DualArray` carries a primal value of shape ``S`` together with a
derivative block of shape ``S + (k,)`` holding directional derivatives along
``k`` seed directions. Arithmetic propagates both parts exactly, so Jacobians
of composed maps are exact to machine precision.

The module also provides the numerically stabilized ratio functions used by
the manifold maps (``tanh(x)/x`` and friends). Each one switches to a short
Taylor expansion near the removable singularity so that both the value and
the derivative stay finite as the argument goes to zero. All of them accept
plain arrays or DualArrays.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "DualArray",
    "seed_identity",
    "value",
    "tanh",
    "sqrt",
    "relu",
    "logaddexp0",
    "sqnorm",
    "tanh_ratio",
    "atanh_ratio",
    "sin_ratio",
    "sinh_ratio",
    "cos_sqrt",
    "arc_ratio",
    "arccos_sq",
    "atanh_sq",
]

_SMALL = 1e-6  # switch point for the Taylor branches (argument is x**2)


class DualArray:
    """Array of first-order dual numbers with a shared direction count."""

    __slots__ = ("val", "dot")

    # opt out of numpy's ufunc dispatch so reflected operators run instead
    __array_ufunc__ = None

    def __init__(self, val, dot):
        self.val = np.asarray(val, dtype=float)
        self.dot = np.asarray(dot, dtype=float)
        if self.dot.shape[: self.val.ndim] != self.val.shape:
            raise ValueError(
                f"dot shape {self.dot.shape} incompatible with value shape {self.val.shape}"
            )

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.val.shape

    @property
    def ndirs(self):
        return self.dot.shape[-1]

    def __repr__(self):
        return f"DualArray(shape={self.val.shape}, ndirs={self.ndirs})"

    def __getitem__(self, idx):
        # Indexing touches value axes only; expand any Ellipsis against the
        # value's ndim so the trailing direction axis is never consumed.
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            pos = idx.index(Ellipsis)
            explicit = sum(1 for i in idx if i is not Ellipsis and i is not None)
            fill = (slice(None),) * (self.val.ndim - explicit)
            idx = idx[:pos] + fill + idx[pos + 1 :]
        return DualArray(self.val[idx], self.dot[idx])

    def sum(self, axis=None):
        if axis is None:
            axes = tuple(range(self.val.ndim))
        elif isinstance(axis, int):
            axes = (axis % self.val.ndim,)
        else:
            axes = tuple(a % self.val.ndim for a in axis)
        return DualArray(self.val.sum(axis=axes), self.dot.sum(axis=axes))

    # -- arithmetic ----------------------------------------------------------

    def __neg__(self):
        return DualArray(-self.val, -self.dot)

    def __add__(self, other):
        if isinstance(other, DualArray):
            return DualArray(self.val + other.val, self.dot + other.dot)
        other = np.asarray(other, dtype=float)
        val = self.val + other
        dot = self.dot
        if val.shape != self.val.shape:
            dot = np.broadcast_to(dot, val.shape + (self.ndirs,))
        return DualArray(val, dot)

    __radd__ = __add__

    def __sub__(self, other):
        return self.__add__(-other if isinstance(other, DualArray) else -np.asarray(other, float))

    def __rsub__(self, other):
        return (-self).__add__(np.asarray(other, dtype=float))

    def __mul__(self, other):
        if isinstance(other, DualArray):
            return DualArray(
                self.val * other.val,
                self.dot * other.val[..., None] + self.val[..., None] * other.dot,
            )
        other = np.asarray(other, dtype=float)
        return DualArray(self.val * other, self.dot * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, DualArray):
            inv = 1.0 / other.val
            val = self.val * inv
            dot = (self.dot - val[..., None] * other.dot) * inv[..., None]
            return DualArray(val, dot)
        other = np.asarray(other, dtype=float)
        return DualArray(self.val / other, self.dot / other[..., None])

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=float)
        inv = 1.0 / self.val
        val = other * inv
        return DualArray(val, -val[..., None] * inv[..., None] * self.dot)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar powers supported")
        val = self.val**p
        return DualArray(val, p * self.val[..., None] ** (p - 1) * self.dot)

    # -- matrix products -----------------------------------------------------

    def __matmul__(self, other):
        # self [n, d] @ other [d, e]
        if self.val.ndim != 2:
            raise ValueError("dual matmul supports 2-D operands only")
        if isinstance(other, DualArray):
            val = self.val @ other.val
            dot = np.einsum("ndk,de->nek", self.dot, other.val) + np.einsum(
                "nd,dek->nek", self.val, other.dot
            )
            return DualArray(val, dot)
        other = np.asarray(other, dtype=float)
        val = self.val @ other
        dot = np.swapaxes(np.swapaxes(self.dot, 1, 2) @ other, 1, 2)
        return DualArray(val, dot)

    def __rmatmul__(self, other):
        # other [m, n] (plain) @ self [n, d]
        other = np.asarray(other, dtype=float)
        if other.ndim != 2 or self.val.ndim != 2:
            raise ValueError("dual matmul supports 2-D operands only")
        n, d = self.val.shape
        k = self.ndirs
        dot = (other @ self.dot.reshape(n, d * k)).reshape(other.shape[0], d, k)
        return DualArray(other @ self.val, dot)


def seed_identity(val, index_pairs=None):
    """Wrap ``val`` as a DualArray seeded with unit directions.

    With ``index_pairs=None`` every entry of ``val`` becomes its own seed
    direction (full Jacobian). Otherwise ``index_pairs`` is a list of index
    tuples into ``val``; direction ``r`` perturbs exactly ``val[index_pairs[r]]``.
    """
    val = np.asarray(val, dtype=float)
    if index_pairs is None:
        k = val.size
        dot = np.eye(k).reshape(val.shape + (k,))
        return DualArray(val, dot)
    k = len(index_pairs)
    dot = np.zeros(val.shape + (k,))
    for r, idx in enumerate(index_pairs):
        dot[idx + (r,)] = 1.0
    return DualArray(val, dot)


def value(x):
    """Primal part of ``x`` whether it is dual or plain."""
    return x.val if isinstance(x, DualArray) else np.asarray(x, dtype=float)


def _lift(x, f, df):
    """Apply elementwise ``f`` with derivative ``df`` to plain or dual input."""
    if isinstance(x, DualArray):
        return DualArray(f(x.val), df(x.val)[..., None] * x.dot)
    return f(np.asarray(x, dtype=float))


def tanh(x):
    return _lift(x, np.tanh, lambda v: 1.0 - np.tanh(v) ** 2)


def sqrt(x):
    return _lift(x, np.sqrt, lambda v: 0.5 / np.sqrt(v))


def relu(x):
    # subgradient at 0 taken as 0: strict inequality in the mask
    return _lift(x, lambda v: np.maximum(v, 0.0), lambda v: (v > 0.0).astype(float))


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def logaddexp0(x):
    """Stable ``log(1 + exp(x))`` with derivative ``sigmoid(x)``."""
    return _lift(x, lambda v: np.logaddexp(0.0, v), _sigmoid)


def sqnorm(x, axis=-1):
    """Squared Euclidean norm along ``axis`` (dual-capable)."""
    return (x * x).sum(axis=axis)


def _branch(q, small_val, small_der, big_val, big_der, cut=_SMALL):
    """Evaluate a ratio function with a Taylor branch below ``cut``.

    ``q`` is the squared argument; both branches receive the full array but
    the big branch is evaluated on safe inputs only.
    """
    q = np.asarray(q, dtype=float)
    small = q < cut
    qsafe = np.where(small, cut, q)
    with np.errstate(invalid="ignore", divide="ignore"):
        bv = big_val(qsafe)
        bd = big_der(qsafe)
    val = np.where(small, small_val(q), bv)
    der = np.where(small, small_der(q), bd)
    return val, der


def _dualize(x, parts):
    if isinstance(x, DualArray):
        v, d = parts(x.val)
        return DualArray(v, d[..., None] * x.dot)
    v, _ = parts(np.asarray(x, dtype=float))
    return v


def _tanh_ratio_parts(q):
    def bv(q):
        s = np.sqrt(q)
        return np.tanh(s) / s

    def bd(q):
        s = np.sqrt(q)
        return (s / np.cosh(s) ** 2 - np.tanh(s)) / (2.0 * s**3)

    return _branch(
        q,
        lambda q: 1.0 - q / 3.0 + 2.0 * q * q / 15.0,
        lambda q: -1.0 / 3.0 + 4.0 * q / 15.0,
        bv,
        bd,
    )


def tanh_ratio(x_sq):
    """``tanh(sqrt(q))/sqrt(q)`` as a smooth, even function of ``q``."""
    return _dualize(x_sq, _tanh_ratio_parts)


def _atanh_ratio_parts(q):
    def bv(q):
        s = np.sqrt(q)
        return np.arctanh(s) / s

    def bd(q):
        s = np.sqrt(q)
        return (s / (1.0 - q) - np.arctanh(s)) / (2.0 * s**3)

    return _branch(
        q,
        lambda q: 1.0 + q / 3.0 + q * q / 5.0,
        lambda q: 1.0 / 3.0 + 2.0 * q / 5.0,
        bv,
        bd,
    )


def atanh_ratio(x_sq):
    """``artanh(sqrt(q))/sqrt(q)``; requires ``q < 1``."""
    return _dualize(x_sq, _atanh_ratio_parts)


def _atanh_sq_parts(q):
    v, d = _atanh_ratio_parts(q)
    # f(q) = q * r(q)^2 with r = atanh_ratio; f' = r^2 + 2 q r r'
    return q * v * v, v * v + 2.0 * q * v * d


def atanh_sq(x_sq):
    """``artanh(sqrt(q))**2``, smooth at 0 (used for squared distances)."""
    return _dualize(x_sq, _atanh_sq_parts)


def _sin_ratio_parts(q):
    def bv(q):
        s = np.sqrt(q)
        return np.sin(s) / s

    def bd(q):
        s = np.sqrt(q)
        return (s * np.cos(s) - np.sin(s)) / (2.0 * s**3)

    return _branch(
        q,
        lambda q: 1.0 - q / 6.0 + q * q / 120.0,
        lambda q: -1.0 / 6.0 + q / 60.0,
        bv,
        bd,
    )


def sin_ratio(x_sq):
    """``sin(sqrt(q))/sqrt(q)``."""
    return _dualize(x_sq, _sin_ratio_parts)


def _sinh_ratio_parts(q):
    def bv(q):
        s = np.sqrt(q)
        return np.sinh(s) / s

    def bd(q):
        s = np.sqrt(q)
        return (s * np.cosh(s) - np.sinh(s)) / (2.0 * s**3)

    return _branch(
        q,
        lambda q: 1.0 + q / 6.0 + q * q / 120.0,
        lambda q: 1.0 / 6.0 + q / 60.0,
        bv,
        bd,
    )


def sinh_ratio(x_sq):
    """``sinh(sqrt(q))/sqrt(q)``."""
    return _dualize(x_sq, _sinh_ratio_parts)


def _cos_sqrt_parts(q):
    sv, _ = _sin_ratio_parts(q)
    return np.cos(np.sqrt(np.maximum(q, 0.0))), -0.5 * sv


def cos_sqrt(x_sq):
    """``cos(sqrt(q))`` with derivative ``-sin_ratio(q)/2``."""
    return _dualize(x_sq, _cos_sqrt_parts)


def _arc_ratio_parts(t):
    # w(t) = arccos(t)/sqrt(1-t^2); smooth from the left at t=1.
    t = np.asarray(t, dtype=float)
    s = 1.0 - t
    near = np.abs(s) < 1e-4
    tsafe = np.where(near, 0.0, t)
    with np.errstate(invalid="ignore", divide="ignore"):
        m = np.sqrt(1.0 - tsafe * tsafe)
        bv = np.arccos(tsafe) / m
        bd = (tsafe * bv - 1.0) / (1.0 - tsafe * tsafe)
    sv = 1.0 + s / 3.0 + 2.0 * s * s / 15.0
    sd = -(1.0 / 3.0 + 4.0 * s / 15.0)
    return np.where(near, sv, bv), np.where(near, sd, bd)


def arc_ratio(t):
    """``arccos(t)/sqrt(1-t**2)`` for ``t`` in (-1, 1]."""
    return _dualize(t, _arc_ratio_parts)


def _arccos_sq_parts(t):
    t = np.asarray(t, dtype=float)
    s = 1.0 - t
    near = np.abs(s) < 1e-4
    tsafe = np.where(near, 0.0, t)
    bv = np.arccos(tsafe) ** 2
    sv = 2.0 * s + s * s / 3.0 + 4.0 * s**3 / 45.0
    w, _ = _arc_ratio_parts(t)
    return np.where(near, sv, bv), -2.0 * w


def arccos_sq(t):
    """``arccos(t)**2`` with the cusp-free derivative ``-2 arccos(t)/sin``."""
    return _dualize(t, _arccos_sq_parts)
