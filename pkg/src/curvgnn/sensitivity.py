"""Exact node-to-node Jacobians and the distance-pair sampling protocol.

Jacobians of layer-ell states with respect to layer-0 states are computed by
forward-mode differentiation: seed one dual direction per coordinate of each
source node's layer-0 state and run the ordinary forward pass. Derivatives of
all nodes at all layers w.r.t. all seeded sources come out of a single run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dmath import DualArray
from .graph import Graph, pairs_at_distance
from .layers import ModelConfig, ingest_features, run_layers, spectral_norm

__all__ = [
    "JacobianBlock",
    "jacobian",
    "jacobian_blocks",
    "jacobian_norm",
    "SensitivityReport",
    "sensitivity_protocol",
]


@dataclass(frozen=True)
class JacobianBlock:
    """d(x_i at layer ell) / d(x_j at layer 0) in state coordinates.

    For the sphere the state coordinates are the ambient dim+1 ones, so the
    block is (dim+1) x (dim+1); ball and Euclidean blocks match the widths.
    """

    i: int
    j: int
    ell: int
    matrix: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("Jacobian block has non-finite entries")


def _seeded_states(cfg: ModelConfig, features, sources):
    """Layer-0 states as duals: one direction per (source node, coordinate)."""
    states0 = ingest_features(cfg, features)
    n, pd = states0.shape
    k = len(sources) * pd
    dot = np.zeros((n, pd, k))
    for s, j in enumerate(sources):
        for r in range(pd):
            dot[j, r, s * pd + r] = 1.0
    return DualArray(states0, dot), pd


def jacobian_blocks_at_layers(cfg: ModelConfig, weights, adj, features, sources, ells):
    """Jacobian blocks for several layers out of a single dual forward pass.

    Returns {ell: array [n, len(sources), pd_out, pd_in]}; the dual states of
    every layer are produced by the same run, so extra layers are free.
    """
    ells = sorted(set(int(e) for e in ells))
    if any(e < 0 or e > cfg.depth for e in ells):
        raise ValueError("layer index must satisfy 0 <= ell <= depth")
    sources = list(sources)
    dual0, pd = _seeded_states(cfg, features, sources)
    states, _, _ = run_layers(cfg, weights, adj, dual0)
    out = {}
    for ell in ells:
        target = states[ell]
        n, pd_out = target.val.shape
        # dot[i, r, s*pd + c] = d x_i[r] / d x_{sources[s]}[c]
        out[ell] = target.dot.reshape(n, pd_out, len(sources), pd).transpose(0, 2, 1, 3)
    return out


def jacobian_blocks(cfg: ModelConfig, weights, adj, features, sources, ell: int):
    """Jacobians of every node's layer-``ell`` state w.r.t. each source node."""
    return jacobian_blocks_at_layers(cfg, weights, adj, features, sources, [ell])[ell]


def jacobian(cfg: ModelConfig, weights, adj, features, i: int, j: int, ell: int) -> JacobianBlock:
    """Single exact Jacobian block; see :func:`jacobian_blocks` for batches."""
    blocks = jacobian_blocks(cfg, weights, adj, features, [j], ell)
    return JacobianBlock(i=i, j=j, ell=ell, matrix=blocks[i, 0])


def jacobian_norm(block, tol: float = 1e-10) -> float:
    """Spectral norm of a Jacobian block (power iteration)."""
    matrix = block.matrix if isinstance(block, JacobianBlock) else np.asarray(block)
    return spectral_norm(matrix, tol=tol)


def frobenius_norm(block) -> float:
    matrix = block.matrix if isinstance(block, JacobianBlock) else np.asarray(block)
    return float(np.sqrt(np.sum(matrix * matrix)))


@dataclass(frozen=True)
class SensitivityReport:
    """Spectral-norm statistics of sampled pair Jacobians at one epoch."""

    epoch: int
    pairs: tuple
    norms: tuple
    frobenius: tuple
    avg: float
    min: float
    max: float

    def __post_init__(self):
        if not (self.min <= self.avg <= self.max):
            raise ValueError("report statistics are inconsistent")


def make_report(epoch: int, pairs, norms, frob) -> SensitivityReport:
    norms = tuple(float(x) for x in norms)
    return SensitivityReport(
        epoch=int(epoch),
        pairs=tuple(pairs),
        norms=norms,
        frobenius=tuple(float(x) for x in frob),
        avg=float(np.mean(norms)),
        min=float(np.min(norms)),
        max=float(np.max(norms)),
    )


def measure_pairs(cfg: ModelConfig, weights, adj, features, pairs, ell: int, epoch: int = 0):
    """Jacobian statistics for explicit (i, j) pairs at layer ``ell``."""
    sources = sorted({j for _, j in pairs})
    src_index = {j: s for s, j in enumerate(sources)}
    blocks = jacobian_blocks(cfg, weights, adj, features, sources, ell)
    norms, frob = [], []
    for i, j in pairs:
        mat = blocks[i, src_index[j]]
        norms.append(spectral_norm(mat))
        frob.append(float(np.sqrt(np.sum(mat * mat))))
    return make_report(epoch, pairs, norms, frob)


def sensitivity_protocol(
    cfg: ModelConfig,
    weights,
    g: Graph,
    adj,
    features,
    d: int,
    count: int,
    seed: int,
    epoch: int = 0,
) -> SensitivityReport:
    """Sample pairs at exact distance ``d`` and measure Jacobians at layer d.

    The model depth must equal ``d`` (the protocol pairs depth with distance).
    """
    if cfg.depth != d:
        raise ValueError("protocol requires model depth equal to the pair distance")
    pairs = pairs_at_distance(g, d, count, seed)
    return measure_pairs(cfg, weights, adj, features, pairs, d, epoch=epoch)
