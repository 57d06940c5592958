"""Plain-text run configuration: one "key = value" per line, '#' comments.

Unknown keys are rejected and referenced paths must exist at parse time.
Relative paths resolve against the config file's directory. All randomness
of a run flows from the single ``protocol.seed`` key.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, generate, load_edge_list, normalized_adjacency
from .layers import Activation, ModelConfig, init_weights, random_unit_features
from .manifold import make_manifold
from .training import TrainConfig

__all__ = ["ConfigError", "RunSetup", "parse_config", "build_setup", "KNOWN_KEYS"]


class ConfigError(ValueError):
    """Invalid, unknown, or missing run-configuration key."""


KNOWN_KEYS = {
    "manifold.model",
    "manifold.curvature",
    "manifold.dim",
    "model.depth",
    "model.widths",
    "model.activation",
    "model.clamp_margin",
    "graph.generator",
    "graph.args",
    "graph.edge_list",
    "protocol.distance",
    "protocol.pair_count",
    "protocol.seed",
    "protocol.feature_scale",
    "train.epochs",
    "train.learning_rate",
    "train.negative_ratio",
    "train.val_fraction",
    "train.test_fraction",
    "train.decoder_r",
    "train.decoder_t",
    "train.sensitivity_every",
    "output.dir",
}

_GENERATOR_ARGS = {
    "binary_tree": {"depth"},
    "rary_tree": {"r", "depth"},
    "path": {"n"},
    "cycle": {"n"},
    "ring_of_cliques": {"c", "k"},
    "random_tree": {"n", "seed"},
}


def parse_config(path) -> dict:
    """Read and validate the raw key/value document."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    conf = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = body.partition("=")
        key, val = key.strip(), val.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key in conf:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}'")
        conf[key] = val
    if "graph.edge_list" in conf:
        edge_path = (path.parent / conf["graph.edge_list"]).resolve()
        if not edge_path.exists():
            raise ConfigError(f"referenced path does not exist: {conf['graph.edge_list']}")
        conf["graph.edge_list"] = str(edge_path)
    conf["__dir__"] = str(path.parent)
    return conf


def _need(conf: dict, key: str) -> str:
    if key not in conf:
        raise ConfigError(f"missing required config key '{key}'")
    return conf[key]


def _as_int(conf, key, default=None):
    raw = conf.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required config key '{key}'")
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}' must be an integer, got {raw!r}") from None


def _as_float(conf, key, default=None):
    raw = conf.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required config key '{key}'")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key '{key}' must be a number, got {raw!r}") from None


def _sub_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1)[0])


@dataclass
class RunSetup:
    """Materialized objects for one run."""

    conf: dict
    graph: Graph
    adjacency: np.ndarray
    model: ModelConfig
    weights: list
    features: np.ndarray
    seed: int
    distance: int
    pair_count: int
    out_dir: Path

    @property
    def kappa(self):
        return self.model.manifold.kappa


def _build_graph(conf: dict, seed: int) -> Graph:
    if "graph.edge_list" in conf and "graph.generator" in conf:
        raise ConfigError("specify either graph.generator or graph.edge_list, not both")
    if "graph.edge_list" in conf:
        return load_edge_list(conf["graph.edge_list"])
    kind = _need(conf, "graph.generator")
    if kind not in _GENERATOR_ARGS:
        raise ConfigError(f"unknown generator '{kind}'")
    params = {}
    for item in filter(None, (s.strip() for s in conf.get("graph.args", "").split(","))):
        if "=" not in item:
            raise ConfigError(f"graph.args entries must be k=v, got {item!r}")
        k, _, v = item.partition("=")
        k = k.strip()
        if k not in _GENERATOR_ARGS[kind]:
            raise ConfigError(f"generator '{kind}' does not take argument '{k}'")
        try:
            params[k] = int(v)
        except ValueError:
            raise ConfigError(f"graph.args value for '{k}' must be an integer") from None
    if kind == "random_tree" and "seed" not in params:
        params["seed"] = _sub_seed(seed, 31)
    missing = _GENERATOR_ARGS[kind] - set(params)
    if missing:
        raise ConfigError(f"generator '{kind}' missing argument(s): {sorted(missing)}")
    return generate(kind, **params)


def build_setup(conf: dict) -> RunSetup:
    """Manifold, model, graph, weights, and features from a parsed config."""
    model_name = _need(conf, "manifold.model")
    kappa = _as_float(conf, "manifold.curvature")
    dim = _as_int(conf, "manifold.dim")
    manifold = make_manifold(kappa, dim)
    if manifold.model != model_name:
        raise ConfigError(
            f"manifold.model '{model_name}' inconsistent with curvature {kappa} "
            f"(expected '{manifold.model}')"
        )
    depth = _as_int(conf, "model.depth")
    if "model.widths" in conf:
        try:
            widths = tuple(int(w) for w in conf["model.widths"].split(","))
        except ValueError:
            raise ConfigError("model.widths must be comma-separated integers") from None
    else:
        widths = (dim,) * (depth + 1)
    act = conf.get("model.activation", "relu")
    try:
        model = ModelConfig(
            manifold,
            depth,
            widths,
            Activation(act),
            clamp_margin=_as_float(conf, "model.clamp_margin", 0.99),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    seed = _as_int(conf, "protocol.seed")
    graph = _build_graph(conf, seed)
    adjacency = normalized_adjacency(graph)
    weights = init_weights(model, _sub_seed(seed, 11))
    features = random_unit_features(
        manifold,
        graph.n,
        widths[0],
        seed=_sub_seed(seed, 7),
        scale=_as_float(conf, "protocol.feature_scale", 1.0),
    )
    out_dir = Path(conf["__dir__"]) / conf.get("output.dir", "out")

    return RunSetup(
        conf=conf,
        graph=graph,
        adjacency=adjacency,
        model=model,
        weights=weights,
        features=features,
        seed=seed,
        distance=_as_int(conf, "protocol.distance", depth if depth > 0 else 1),
        pair_count=_as_int(conf, "protocol.pair_count", 100),
        out_dir=out_dir,
    )


def build_train_config(conf: dict) -> TrainConfig:
    try:
        return TrainConfig(
            epochs=_as_int(conf, "train.epochs"),
            learning_rate=_as_float(conf, "train.learning_rate"),
            negative_ratio=_as_float(conf, "train.negative_ratio", 1.0),
            val_fraction=_as_float(conf, "train.val_fraction", 0.1),
            test_fraction=_as_float(conf, "train.test_fraction", 0.1),
            decoder_r=_as_float(conf, "train.decoder_r", 2.0),
            decoder_t=_as_float(conf, "train.decoder_t", 1.0),
            seed=_as_int(conf, "protocol.seed"),
            sensitivity_every=_as_int(conf, "train.sensitivity_every", 0),
            sensitivity_pairs=_as_int(conf, "protocol.pair_count", 100),
            feature_scale=_as_float(conf, "protocol.feature_scale", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
