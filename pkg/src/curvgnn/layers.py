"""Manifold GNN layer and forward pass with radius tracking.

One layer maps node states x_j to

    x_i' = sigma( exp_o( sum_j A_hat[i, j] * W @ log_o(x_j) ) )

with the reference point fixed to the manifold origin, the tangent aggregate
clamped inside the injectivity radius before exp, and sigma applied to the
output coordinates (renormalized back onto the sphere when it moves points
off it; a no-op on the ball and in Euclidean space).

The core runner is generic over plain arrays and DualArrays, so exact
Jacobians (w.r.t. inputs or weights) flow through unchanged code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dmath as dm
from .dmath import DualArray, value
from .manifold import Manifold

__all__ = [
    "Activation",
    "ModelConfig",
    "ForwardTrace",
    "init_weights",
    "random_unit_features",
    "ingest_features",
    "rgnn_layer",
    "run_layers",
    "forward",
    "min_preactivation",
    "spectral_norm",
]

_ACTIVATIONS = ("relu", "identity", "tanh")


@dataclass(frozen=True)
class Activation:
    """Coordinate-wise nonlinearity; all supported kinds are 1-Lipschitz."""

    kind: str
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.kind not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        if self.lipschitz != 1.0:
            raise ValueError("supported activations all have Lipschitz constant 1")

    def apply(self, x):
        if self.kind == "relu":
            return dm.relu(x)
        if self.kind == "tanh":
            return dm.tanh(x)
        return x


@dataclass(frozen=True)
class ModelConfig:
    """Depth, widths, activation and clamp policy over a fixed manifold.

    The reference point policy is 'origin': the ball/Euclidean origin, or the
    sphere's north pole (0, ..., 0, R). Curved manifolds require constant
    width equal to the manifold dimension; Euclidean widths may vary.
    """

    manifold: Manifold
    depth: int
    widths: tuple
    activation: Activation = field(default_factory=lambda: Activation("relu"))
    clamp_margin: float = 0.99
    reference_policy: str = "origin"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if len(self.widths) != self.depth + 1:
            raise ValueError("widths must have length depth + 1")
        if any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        if self.reference_policy != "origin":
            raise ValueError("only the 'origin' reference policy is supported")
        if not (0.0 < self.clamp_margin < 1.0):
            raise ValueError("clamp_margin must lie in (0, 1)")
        if self.manifold.kappa != 0.0 and any(w != self.manifold.dim for w in self.widths):
            raise ValueError(
                "curved manifolds require all widths equal to the manifold dimension"
            )


@dataclass
class ForwardTrace:
    """Per-layer states plus the radii that enter the sensitivity bounds.

    r_exp[i] is the sup over layers of the (post-clamp) metric norm of node
    i's tangent aggregate; r_log[i] is the sup over layers and over the
    closed neighborhood of i of the states' metric distance from the origin.
    """

    states: list
    pre_exp_norms: np.ndarray  # [depth, n]
    state_radii: np.ndarray  # [depth + 1, n]
    r_exp: np.ndarray  # [n]
    r_log: np.ndarray  # [n]
    clamp_count: int


def _chart_metric_scale(m: Manifold) -> float:
    # metric norm of an origin-chart tangent vector per unit coordinate norm
    return 2.0 if m.model == "poincare_ball" else 1.0


def random_unit_features(m: Manifold, n: int, width: int, seed: int, scale: float = 1.0):
    """Seeded random tangent features with metric norm ``scale`` per node.

    The default input convention when a dataset supplies no features. Rows
    are origin-chart tangent vectors; on the ball the chart carries half the
    metric norm (lambda at the origin is 2), so coordinates are scaled down
    accordingly.
    """
    if m.kappa != 0.0 and width != m.dim:
        raise ValueError("curved manifolds require feature width == dim")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, width))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return v * (scale / _chart_metric_scale(m))


def init_weights(cfg: ModelConfig, seed: int) -> list:
    """Gaussian weights scaled by 1/sqrt(fan_in), deterministic per seed."""
    rng = np.random.default_rng(seed)
    out = []
    for ell in range(cfg.depth):
        fan_in = cfg.widths[ell]
        out.append(rng.standard_normal((cfg.widths[ell + 1], fan_in)) / np.sqrt(fan_in))
    return out


def ingest_features(cfg: ModelConfig, features):
    """Map raw features onto the manifold as the layer-0 states.

    Euclidean features pass through; for curved manifolds the rows are
    tangent vectors at the origin (chart coordinates) pushed through exp.
    """
    m = cfg.manifold
    feats = np.asarray(features, dtype=float)
    if feats.shape[-1] != cfg.widths[0]:
        raise ValueError(
            f"features have width {feats.shape[-1]}, expected {cfg.widths[0]}"
        )
    if m.kappa == 0.0:
        return feats
    clamped = m.clamp_tangent(m.origin(), feats, cfg.clamp_margin)
    return m.exp0_chart(clamped)


def _one_layer(cfg: ModelConfig, adj, w, states):
    """Single update; returns (new states, clamped aggregate, clamp hits, pre-act)."""
    m = cfg.manifold
    tangents = m.log0_chart(states)
    agg = adj @ (tangents @ (w.T if not isinstance(w, DualArray) else _dual_T(w)))
    limit = m.injectivity_radius()
    clamp_hits = 0
    if np.isfinite(limit):
        norms = np.sqrt(np.sum(value(agg) ** 2, axis=-1))
        clamp_hits = int(np.sum(norms >= cfg.clamp_margin * limit))
        agg = m.clamp_tangent(m.origin(), agg, cfg.clamp_margin)
    pre_act = m.exp0_chart(agg)
    new_states = cfg.activation.apply(pre_act)
    if m.model == "sphere" and cfg.activation.kind != "identity":
        new_states = m.project(new_states)
    return new_states, agg, clamp_hits, pre_act


def _dual_T(w: DualArray) -> DualArray:
    return DualArray(w.val.T, np.swapaxes(w.dot, 0, 1))


def rgnn_layer(states, adj, w, cfg: ModelConfig):
    """One layer as a standalone operation.

    Returns the new states and the per-node metric norms of the (clamped)
    tangent aggregates fed to exp.
    """
    m = cfg.manifold
    m.check_point(value(states))
    new_states, agg, _, _ = _one_layer(cfg, adj, w, states)
    norms = _chart_metric_scale(m) * np.sqrt(np.sum(value(agg) ** 2, axis=-1))
    return new_states, norms


def run_layers(cfg: ModelConfig, weights, adj, states0):
    """All layers from materialized layer-0 states; dual-capable.

    Returns (list of per-layer states, [depth, n] aggregate metric norms,
    clamp hit count).
    """
    if len(weights) != cfg.depth:
        raise ValueError("need exactly one weight matrix per layer")
    states = [states0]
    norms = []
    clamp_count = 0
    scale = _chart_metric_scale(cfg.manifold)
    cur = states0
    for w in weights:
        cur, agg, hits, _ = _one_layer(cfg, adj, w, cur)
        clamp_count += hits
        norms.append(scale * np.sqrt(np.sum(value(agg) ** 2, axis=-1)))
        states.append(cur)
    n = value(states0).shape[0]
    norm_arr = np.asarray(norms) if norms else np.zeros((0, n))
    return states, norm_arr, clamp_count


def forward(cfg: ModelConfig, weights, adj, features) -> ForwardTrace:
    """Full forward pass with radius bookkeeping (plain arrays only)."""
    states0 = ingest_features(cfg, features)
    states, pre_exp, clamp_count = run_layers(cfg, weights, adj, states0)
    m = cfg.manifold
    n = states0.shape[0]
    radii = np.stack([m.dist0(s) for s in states])
    r_exp = pre_exp.max(axis=0) if cfg.depth > 0 else np.zeros(n)
    # closed neighborhood = nonzero pattern of A_hat (self-loops included)
    mask = np.asarray(adj) > 0.0
    per_node_sup = radii.max(axis=0)
    r_log = np.where(mask, per_node_sup[None, :], -np.inf).max(axis=1)
    return ForwardTrace(
        states=states,
        pre_exp_norms=pre_exp,
        state_radii=radii,
        r_exp=r_exp,
        r_log=r_log,
        clamp_count=clamp_count,
    )


def min_preactivation(cfg: ModelConfig, weights, adj, features) -> float:
    """Smallest |coordinate| entering the activation over a full run.

    Finite-difference harnesses use this to re-seed instances whose relu
    inputs sit too close to the kink for the difference step.
    """
    cur = ingest_features(cfg, features)
    best = np.inf
    for w in weights:
        cur, _, _, pre_act = _one_layer(cfg, adj, w, cur)
        best = min(best, float(np.min(np.abs(value(pre_act)))))
    return best


def spectral_norm(w, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Largest singular value by power iteration on W^T W.

    Deterministic seeded start vector; converges to relative ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    w = np.asarray(w, dtype=float)
    gram = w.T @ w
    n = gram.shape[0]
    v = np.random.default_rng(0).standard_normal(n)
    v /= np.linalg.norm(v)
    sigma_sq = 0.0
    for _ in range(max_iter):
        u = gram @ v
        norm = np.linalg.norm(u)
        if norm == 0.0:
            return 0.0
        v = u / norm
        new_sigma_sq = float(v @ (gram @ v))
        if abs(new_sigma_sq - sigma_sq) <= tol * max(new_sigma_sq, 1e-300):
            sigma_sq = new_sigma_sq
            break
        sigma_sq = new_sigma_sq
    return float(np.sqrt(max(sigma_sq, 0.0)))
