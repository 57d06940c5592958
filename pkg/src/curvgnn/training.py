"""Desk-scale link-prediction training with per-epoch sensitivity tracking.

Full-batch gradient descent on binary cross-entropy with a distance decoder:

    p(u, v) = 1 / (exp((d(x_u, x_v)^2 - r) / t) + 1)

Weights live in Euclidean parameter space (they act on tangent vectors), so
plain gradient descent is well-defined; gradients are exact, computed by the
same forward-mode duals used for the Jacobian analysis, seeded over every
weight entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dmath as dm
from .dmath import DualArray
from .graph import Graph, normalized_adjacency, pairs_at_distance
from .layers import (
    ModelConfig,
    ingest_features,
    init_weights,
    random_unit_features,
    run_layers,
)
from .sensitivity import SensitivityReport, measure_pairs

__all__ = [
    "TrainConfig",
    "EpochLog",
    "DivergenceError",
    "split_edges",
    "edge_probability",
    "loss_and_grad",
    "train",
]


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 0.05
    negative_ratio: float = 1.0
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    decoder_r: float = 2.0
    decoder_t: float = 1.0
    seed: int = 0
    sensitivity_every: int = 0  # 0 disables per-epoch sensitivity reports
    sensitivity_pairs: int = 100
    feature_scale: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.decoder_t <= 0:
            raise ValueError("decoder temperature must be positive")
        if self.negative_ratio < 0:
            raise ValueError("negative_ratio must be nonnegative")
        if not (0.0 <= self.val_fraction + self.test_fraction < 1.0):
            raise ValueError("val and test fractions must leave a positive train share")
        if self.sensitivity_every < 0:
            raise ValueError("sensitivity_every must be nonnegative")


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    loss: float
    val_auc: float
    sensitivity: SensitivityReport | None = None


def _spanning_tree(g: Graph, rng) -> set:
    """Random spanning tree via union-find over a shuffled edge list."""
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order = rng.permutation(g.m)
    tree = set()
    for idx in order:
        u, v = g.edges[idx]
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[ru] = rv
            tree.add((u, v))
    if len(tree) != g.n - 1:
        raise ValueError("split requires a connected graph")
    return tree


def _non_edges(g: Graph):
    present = set(g.edges)
    return [
        (u, v) for u in range(g.n) for v in range(u + 1, g.n) if (u, v) not in present
    ]


def split_edges(g: Graph, tc: TrainConfig):
    """Deterministic train/val/test edge split keeping a spanning tree in train.

    Validation and test targets are round(m * fraction), capped by the pool of
    non-tree edges (validation takes precedence). A graph with no removable
    edge (a tree) errors when the fractions ask for any held-out positives.
    Negatives are sampled uniformly from non-edges, one per positive.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(tc.seed), 101]))
    tree = _spanning_tree(g, rng)
    pool = [e for e in g.edges if e not in tree]
    val_target = int(round(g.m * tc.val_fraction))
    test_target = int(round(g.m * tc.test_fraction))
    if (val_target > 0 or test_target > 0) and not pool:
        raise ValueError(
            "graph too small to split: every edge lies in the spanning tree"
        )
    order = rng.permutation(len(pool))
    pool = [pool[i] for i in order]
    val_n = min(val_target, len(pool))
    test_n = min(test_target, len(pool) - val_n)
    val_pos = sorted(pool[:val_n])
    test_pos = sorted(pool[val_n : val_n + test_n])
    train_edges = tuple(sorted(tree.union(pool[val_n + test_n :])))
    train_graph = Graph(g.n, train_edges)

    non_edges = _non_edges(g)
    need = len(val_pos) + len(test_pos)
    if need > len(non_edges):
        raise ValueError("graph too dense to sample held-out negatives")
    pick = rng.choice(len(non_edges), size=need, replace=False) if need else []
    chosen = [non_edges[int(k)] for k in pick]
    val_neg = sorted(chosen[: len(val_pos)])
    test_neg = sorted(chosen[len(val_pos) :])
    return train_graph, val_pos, val_neg, test_pos, test_neg


def edge_probability(m, x_u, x_v, r: float, t: float):
    """Distance decoder 1 / (exp((d^2 - r)/t) + 1); decreasing in distance."""
    if t <= 0:
        raise ValueError("decoder temperature must be positive")
    d_sq = dm.value(m.distance_sq(np.asarray(x_u, float), np.asarray(x_v, float)))
    z = (d_sq - r) / t
    return 1.0 / (np.exp(np.minimum(z, 500.0)) + 1.0)


def _dual_weights(weights):
    """Weights as duals with one seed direction per entry across all layers."""
    total = sum(w.size for w in weights)
    out = []
    offset = 0
    for w in weights:
        dot = np.zeros((w.shape[0], w.shape[1], total))
        idx = np.arange(w.size) + offset
        dot.reshape(w.size, total)[np.arange(w.size), idx] = 1.0
        out.append(DualArray(w, dot))
        offset += w.size
    return out


def _bce_loss(cfg, weights, adj, states0, pos, neg, tc):
    """Mean BCE of the decoder over positive and negative pairs (dual-capable)."""
    states, _, _ = run_layers(cfg, weights, adj, states0)
    x = states[-1]
    m = cfg.manifold
    terms = []
    if pos:
        u = np.fromiter((p[0] for p in pos), int)
        v = np.fromiter((p[1] for p in pos), int)
        z = (m.distance_sq(x[u], x[v]) - tc.decoder_r) * (1.0 / tc.decoder_t)
        terms.append(dm.logaddexp0(z).sum())
    if neg:
        u = np.fromiter((p[0] for p in neg), int)
        v = np.fromiter((p[1] for p in neg), int)
        z = (m.distance_sq(x[u], x[v]) - tc.decoder_r) * (1.0 / tc.decoder_t)
        terms.append(dm.logaddexp0(-z).sum())
    total = terms[0] if len(terms) == 1 else terms[0] + terms[1]
    return total / float(len(pos) + len(neg))


def loss_and_grad(cfg: ModelConfig, weights, adj, features, pos, neg, tc: TrainConfig):
    """Exact loss gradient w.r.t. every weight entry via forward-mode duals."""
    states0 = ingest_features(cfg, features)
    dual = _bce_loss(cfg, _dual_weights(weights), adj, states0, pos, neg, tc)
    flat = dual.dot
    grads = []
    offset = 0
    for w in weights:
        grads.append(flat[offset : offset + w.size].reshape(w.shape))
        offset += w.size
    return float(dual.val), grads


def loss_value(cfg: ModelConfig, weights, adj, features, pos, neg, tc: TrainConfig):
    states0 = ingest_features(cfg, features)
    return float(_bce_loss(cfg, weights, adj, states0, pos, neg, tc))


def _auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC; 0.5 when either side is empty."""
    if len(pos_scores) == 0 or len(neg_scores) == 0:
        return 0.5
    pos = np.asarray(pos_scores)[:, None]
    neg = np.asarray(neg_scores)[None, :]
    wins = np.sum(pos > neg) + 0.5 * np.sum(pos == neg)
    return float(wins / (pos.size * neg.size))


def train(cfg: ModelConfig, tc: TrainConfig, g: Graph, features=None, init_seed=None):
    """Full-batch gradient descent; returns one EpochLog per epoch.

    Sensitivity reports, when enabled, sample a fixed set of node pairs at
    distance ``cfg.depth`` in the train graph once and reuse it every logged
    epoch; logging happens after that epoch's update. All randomness flows
    from ``tc.seed``.
    """
    train_graph, val_pos, val_neg, test_pos, test_neg = split_edges(g, tc)
    adj = normalized_adjacency(train_graph)
    if features is None:
        features = random_unit_features(
            cfg.manifold,
            g.n,
            cfg.widths[0],
            seed=int(np.random.SeedSequence([int(tc.seed), 202]).generate_state(1)[0]),
            scale=tc.feature_scale,
        )
    weights = init_weights(cfg, int(tc.seed) + 303 if init_seed is None else init_seed)

    pos = list(train_graph.edges)
    rng = np.random.default_rng(np.random.SeedSequence([int(tc.seed), 404]))
    non_edges = _non_edges(g)
    n_neg = min(int(round(tc.negative_ratio * len(pos))), len(non_edges))
    pick = rng.choice(len(non_edges), size=n_neg, replace=False) if n_neg else []
    neg = sorted(non_edges[int(k)] for k in pick)

    sens_pairs = None
    if tc.sensitivity_every > 0:
        sens_pairs = pairs_at_distance(
            train_graph, cfg.depth, tc.sensitivity_pairs,
            seed=int(np.random.SeedSequence([int(tc.seed), 505]).generate_state(1)[0]),
        )

    logs = []
    for epoch in range(1, tc.epochs + 1):
        loss, grads = loss_and_grad(cfg, weights, adj, features, pos, neg, tc)
        if not np.isfinite(loss):
            raise DivergenceError(
                f"loss became non-finite at epoch {epoch}; reduce the learning rate"
            )
        if tc.learning_rate != 0.0:
            weights = [w - tc.learning_rate * gw for w, gw in zip(weights, grads)]

        m = cfg.manifold
        states0 = ingest_features(cfg, features)
        x = run_layers(cfg, weights, adj, states0)[0][-1]

        def probs(pairs):
            if not pairs:
                return np.empty(0)
            uu = np.fromiter((p[0] for p in pairs), int)
            vv = np.fromiter((p[1] for p in pairs), int)
            return edge_probability(m, x[uu], x[vv], tc.decoder_r, tc.decoder_t)

        p_pos = probs(val_pos)
        p_neg = probs(val_neg)
        report = None
        if sens_pairs is not None and (
            epoch % tc.sensitivity_every == 0 or epoch == tc.epochs
        ):
            report = measure_pairs(
                cfg, weights, adj, features, sens_pairs, cfg.depth, epoch=epoch
            )
        logs.append(EpochLog(epoch=epoch, loss=loss, val_auc=_auc(p_pos, p_neg), sensitivity=report))
    return logs, weights
