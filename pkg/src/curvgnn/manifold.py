"""Constant-curvature Riemannian manifolds with exact geometric primitives.

Three space forms are provided, selected by the sign of the sectional
curvature ``kappa``:

* ``Euclidean``    (kappa = 0)  -- plain R^d, intrinsic coordinates,
* ``PoincareBall`` (kappa < 0)  -- open ball of radius 1/sqrt(-kappa) with the
  conformal metric factor lambda_x = 2 / (1 + kappa |x|^2),
* ``Sphere``       (kappa > 0)  -- radius 1/sqrt(kappa), ambient (dim+1)
  coordinates.

Points and tangent vectors are plain float64 arrays whose last axis is the
coordinate axis; every operation is vectorized over leading axes and pure.
The origin-chart operations (``log0_chart`` / ``exp0_chart`` / ``distance_sq``)
additionally accept :class:`~curvgnn.dmath.DualArray` inputs so that exact
forward-mode Jacobians can flow through them.
"""

from __future__ import annotations

import math

import numpy as np

from . import dmath as dm
from .dmath import DualArray, value

__all__ = [
    "Manifold",
    "Euclidean",
    "PoincareBall",
    "Sphere",
    "make_manifold",
    "sn_kappa",
    "exp_map",
    "log_map",
    "distance",
    "metric_norm",
    "injectivity_radius",
    "clamp_to_injectivity",
]


def sn_kappa(kappa, r):
    """Generalized sine: sin(sqrt(k) r)/sqrt(k), r, or sinh(sqrt(-k) r)/sqrt(-k).

    Total function of (kappa, r); continuous in kappa at 0 where it equals r.
    """
    kappa = np.asarray(kappa, dtype=float)
    r = np.asarray(r, dtype=float)
    # sn_k(r) = r * f(kappa * r^2) with f the even sin-ratio/sinh-ratio
    q = kappa * r * r
    pos = dm.sin_ratio(np.where(q > 0, q, 0.0))
    neg = dm.sinh_ratio(np.where(q < 0, -q, 0.0))
    out = r * np.where(q > 0, pos, np.where(q < 0, neg, 1.0))
    if out.ndim == 0:
        return float(out)
    return out


class Manifold:
    """Common surface for the three space forms.

    Attributes
    ----------
    kappa : float
        Constant sectional curvature. Classification into negative / zero /
        positive is exact (literal sign of the float, no epsilon band).
    dim : int
        Intrinsic dimension.
    point_dim : int
        Length of a point's coordinate vector (``dim`` or ``dim + 1``).
    """

    model = "abstract"

    def __init__(self, kappa, dim):
        kappa = float(kappa)
        if not math.isfinite(kappa):
            raise ValueError("curvature must be finite")
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.kappa = kappa
        self.dim = int(dim)

    def __repr__(self):
        return f"{type(self).__name__}(kappa={self.kappa}, dim={self.dim})"

    # Subclasses implement: origin, check_point, check_tangent, exp, log,
    # distance, distance_sq, metric_norm, injectivity_radius, log0_chart,
    # exp0_chart, dist0, random_point, random_tangent.

    def clamp_tangent(self, p, v, margin=0.99):
        """Rescale ``v`` so its metric norm stays below margin * injectivity radius.

        Returns ``v`` unchanged when already inside (always, for kappa <= 0).
        Dual-capable for the sphere, the only model where clamping can fire;
        there the metric norm equals the coordinate norm, and the derivative
        flows through the rescale factor on the rows it touches.
        """
        if not (0.0 < margin < 1.0):
            raise ValueError("margin must lie in (0, 1)")
        limit = self.injectivity_radius(p)
        if math.isinf(limit):
            return v
        target = margin * limit
        norm = np.sqrt(np.sum(value(v) ** 2, axis=-1))
        live = norm >= target
        if not np.any(live):
            return v
        if isinstance(v, DualArray):
            dn = dm.sqrt(dm.sqnorm(v))
            denom = DualArray(
                np.where(live, dn.val, 1.0), np.where(live[..., None], dn.dot, 0.0)
            )
            factor = np.where(live, target, 1.0) / denom
            return v * _expand_like(factor, v)
        scale = np.where(live, target / np.where(live, norm, 1.0), 1.0)
        return v * scale[..., None]


def _expand_like(scalar, vec):
    """Attach a trailing coordinate axis to a per-row scalar (dual-aware)."""
    if isinstance(scalar, DualArray):
        return DualArray(scalar.val[..., None], scalar.dot[..., None, :])
    return np.asarray(scalar)[..., None]


class Euclidean(Manifold):
    model = "euclidean"

    def __init__(self, dim):
        super().__init__(0.0, dim)
        self.point_dim = self.dim

    def origin(self):
        return np.zeros(self.dim)

    def check_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.point_dim:
            raise ValueError(f"point has {x.shape[-1]} coordinates, expected {self.point_dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point has non-finite coordinates")

    def check_tangent(self, p, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.point_dim:
            raise ValueError("tangent vector has wrong length")
        if not np.all(np.isfinite(v)):
            raise ValueError("tangent vector has non-finite components")

    def exp(self, p, v):
        return np.asarray(p, dtype=float) + np.asarray(v, dtype=float)

    def log(self, p, x):
        return np.asarray(x, dtype=float) - np.asarray(p, dtype=float)

    def distance(self, x, y):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.sqrt(np.sum(d * d, axis=-1))

    def distance_sq(self, x, y):
        d = x - y
        return dm.sqnorm(d)

    def metric_norm(self, p, v):
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.sum(v * v, axis=-1))

    def injectivity_radius(self, p=None):
        return math.inf

    def log0_chart(self, x):
        return x

    def exp0_chart(self, u):
        return u

    def dist0(self, x):
        return self.metric_norm(None, value(x))

    def random_point(self, rng, n, max_radius=2.0):
        d = rng.standard_normal((n, self.dim))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return d * rng.uniform(0.0, max_radius, size=(n, 1))

    def random_tangent(self, rng, p, radius):
        v = rng.standard_normal(np.shape(p))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return v * np.asarray(radius)[..., None]


class PoincareBall(Manifold):
    """Poincare ball of curvature kappa < 0 (coordinate radius 1/sqrt(-kappa))."""

    model = "poincare_ball"

    def __init__(self, kappa, dim):
        if not kappa < 0:
            raise ValueError("Poincare ball requires kappa < 0")
        super().__init__(kappa, dim)
        self.c = -self.kappa
        self.sqrt_c = math.sqrt(self.c)
        self.point_dim = self.dim

    def origin(self):
        return np.zeros(self.dim)

    def _lam(self, x):
        """Conformal factor lambda_x = 2 / (1 - c |x|^2)."""
        x = np.asarray(x, dtype=float)
        return 2.0 / (1.0 - self.c * np.sum(x * x, axis=-1))

    def check_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.point_dim:
            raise ValueError(f"point has {x.shape[-1]} coordinates, expected {self.point_dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point has non-finite coordinates")
        lim = 1.0 / self.sqrt_c
        if not np.all(np.linalg.norm(x, axis=-1) < lim):
            raise ValueError("point lies outside the ball of radius 1/sqrt(-kappa)")

    def check_tangent(self, p, v, tol=1e-9):
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.point_dim:
            raise ValueError("tangent vector has wrong length")
        if not np.all(np.isfinite(v)):
            raise ValueError("tangent vector has non-finite components")

    def mobius_add(self, x, y):
        """Mobius addition x (+)_c y; accepts dual inputs."""
        xy = (x * y).sum(axis=-1)
        xx = dm.sqnorm(x)
        yy = dm.sqnorm(y)
        num_x = _expand_like(1.0 + 2.0 * self.c * xy + self.c * yy, x)
        num_y = _expand_like(1.0 - self.c * xx, y)
        den = _expand_like(1.0 + 2.0 * self.c * xy + self.c * self.c * xx * yy, x)
        return (num_x * x + num_y * y) / den

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        lam = self._lam(p)[..., None]
        q = self.c * (lam / 2.0) ** 2 * np.sum(v * v, axis=-1, keepdims=True)
        step = dm.tanh_ratio(q) * (lam / 2.0) * v
        return self.mobius_add(p, step)

    def log(self, p, x):
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        m = self.mobius_add(-p, x)
        q = self.c * np.sum(m * m, axis=-1, keepdims=True)
        lam = self._lam(p)[..., None]
        return (2.0 / lam) * dm.atanh_ratio(q) * m

    def distance(self, x, y):
        m = self.mobius_add(-np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        s = self.sqrt_c * np.linalg.norm(m, axis=-1)
        return (2.0 / self.sqrt_c) * np.arctanh(s)

    def distance_sq(self, x, y):
        m = self.mobius_add(-x if isinstance(x, DualArray) else -np.asarray(x, float), y)
        q = self.c * dm.sqnorm(m)
        return (4.0 / self.c) * dm.atanh_sq(q)

    def metric_norm(self, p, v):
        v = np.asarray(v, dtype=float)
        return self._lam(p) * np.sqrt(np.sum(v * v, axis=-1))

    def injectivity_radius(self, p=None):
        return math.inf

    def log0_chart(self, x):
        q = self.c * dm.sqnorm(x)
        return _expand_like(dm.atanh_ratio(q), x) * x

    def exp0_chart(self, u):
        # metric norm of u at the origin is 2|u|; the chart absorbs lambda_o = 2
        q = self.c * dm.sqnorm(u)
        return _expand_like(dm.tanh_ratio(q), u) * u

    def dist0(self, x):
        x = value(x)
        s = self.sqrt_c * np.linalg.norm(x, axis=-1)
        return (2.0 / self.sqrt_c) * np.arctanh(s)

    def random_point(self, rng, n, max_radius=2.0):
        d = rng.standard_normal((n, self.dim))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        rho = rng.uniform(0.0, max_radius, size=(n, 1))  # metric radius
        coord = np.tanh(self.sqrt_c * rho / 2.0) / self.sqrt_c
        return d * coord

    def random_tangent(self, rng, p, radius):
        """Tangent at p with metric norm ``radius``."""
        v = rng.standard_normal(np.shape(p))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        lam = self._lam(p)[..., None]
        return v * np.asarray(radius)[..., None] / lam


class Sphere(Manifold):
    """Sphere of curvature kappa > 0 in ambient (dim+1) coordinates."""

    model = "sphere"

    def __init__(self, kappa, dim):
        if not kappa > 0:
            raise ValueError("sphere requires kappa > 0")
        super().__init__(kappa, dim)
        self.radius = 1.0 / math.sqrt(self.kappa)
        self.point_dim = self.dim + 1

    def origin(self):
        o = np.zeros(self.point_dim)
        o[-1] = self.radius
        return o

    def check_point(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.point_dim:
            raise ValueError(f"point has {x.shape[-1]} coordinates, expected {self.point_dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError("point has non-finite coordinates")
        r = np.linalg.norm(x, axis=-1)
        if not np.all(np.abs(r - self.radius) <= tol * self.radius):
            raise ValueError("point does not lie on the sphere (|x| != 1/sqrt(kappa))")

    def check_tangent(self, p, v, tol=1e-9):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.point_dim:
            raise ValueError("tangent vector has wrong length")
        inner = np.abs(np.sum(p * v, axis=-1))
        scale = self.radius * (1.0 + np.linalg.norm(v, axis=-1))
        if not np.all(inner <= tol * scale):
            raise ValueError("tangent vector is not orthogonal to its base point")

    def exp(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v, axis=-1)
        if np.any(norm >= self.injectivity_radius() * (1.0 - 1e-12)):
            raise ValueError(
                "tangent vector reaches the injectivity radius; clamp it first"
            )
        q = (norm / self.radius) ** 2
        q = q[..., None]
        return dm.cos_sqrt(q) * p + dm.sin_ratio(q) * v

    def log(self, p, x):
        p = np.asarray(p, dtype=float)
        x = np.asarray(x, dtype=float)
        t = np.sum(p * x, axis=-1) / self.radius**2
        t = np.clip(t, -1.0, 1.0)
        if np.any(t <= -1.0 + 1e-12):
            raise ValueError("logarithm undefined at the antipode")
        u = x - t[..., None] * p
        return dm.arc_ratio(t)[..., None] * u

    def distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.clip(np.sum(x * y, axis=-1) / self.radius**2, -1.0, 1.0)
        return self.radius * np.arccos(t)

    def distance_sq(self, x, y):
        t = (x * y).sum(axis=-1) / self.radius**2
        return self.radius**2 * dm.arccos_sq(t)

    def metric_norm(self, p, v):
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.sum(v * v, axis=-1))

    def injectivity_radius(self, p=None):
        return math.pi * self.radius

    def log0_chart(self, x):
        # at the north pole the ambient tangent's last component is exactly 0
        t = x[..., -1] / self.radius
        w = dm.arc_ratio(t)
        u = x[..., : self.dim] * _expand_like(w, x)
        return u

    def exp0_chart(self, u):
        q = dm.sqnorm(u) / self.radius**2
        cospart = dm.cos_sqrt(q) * self.radius
        sinpart = _expand_like(dm.sin_ratio(q), u) * u
        if isinstance(u, DualArray):
            val = np.concatenate([sinpart.val, cospart.val[..., None]], axis=-1)
            dot = np.concatenate([sinpart.dot, cospart.dot[..., None, :]], axis=-2)
            return DualArray(val, dot)
        return np.concatenate([sinpart, np.asarray(cospart)[..., None]], axis=-1)

    def project(self, x):
        """Renormalize near-sphere coordinates back onto the sphere (dual-capable)."""
        norm = dm.sqrt(dm.sqnorm(x))
        return x * _expand_like(self.radius / norm, x)

    def dist0(self, x):
        x = value(x)
        t = np.clip(x[..., -1] / self.radius, -1.0, 1.0)
        return self.radius * np.arccos(t)

    def random_point(self, rng, n, max_radius=None):
        if max_radius is None:
            max_radius = 0.9 * self.injectivity_radius()
        u = rng.standard_normal((n, self.dim))
        u /= np.linalg.norm(u, axis=-1, keepdims=True)
        rho = rng.uniform(0.0, max_radius, size=(n, 1))
        v = np.concatenate([u * rho, np.zeros((n, 1))], axis=-1)
        return self.exp(self.origin(), v)

    def random_tangent(self, rng, p, radius):
        p = np.asarray(p, dtype=float)
        v = rng.standard_normal(np.shape(p))
        v -= (np.sum(v * p, axis=-1, keepdims=True) / self.radius**2) * p
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return v * np.asarray(radius)[..., None]


def make_manifold(kappa, dim):
    """Space form of curvature ``kappa``: ball, Euclidean space, or sphere."""
    kappa = float(kappa)
    if kappa < 0:
        return PoincareBall(kappa, dim)
    if kappa == 0.0:
        return Euclidean(dim)
    return Sphere(kappa, dim)


# -- free-function surface over the methods ----------------------------------


def exp_map(m, p, v):
    """Geodesic endpoint exp_p(v); rejects v at or past the injectivity radius."""
    if m.metric_norm(p, v) >= m.injectivity_radius(p) * (1.0 - 1e-12):
        raise ValueError("tangent vector reaches the injectivity radius; clamp it first")
    return m.exp(p, v)


def log_map(m, p, x):
    return m.log(p, x)


def distance(m, x, y):
    return m.distance(x, y)


def metric_norm(m, p, v):
    return m.metric_norm(p, v)


def injectivity_radius(m, p=None):
    return m.injectivity_radius(p)


def clamp_to_injectivity(m, p, v, margin=0.99):
    return m.clamp_tangent(p, v, margin)
