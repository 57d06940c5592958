"""Command-line entry point.

Subcommands: generate, hyperbolicity, sensitivity, verify-bounds, train,
beta-table. Exit codes: 0 success, 1 verification failure, 2 usage or config
error, 3 numerical divergence. Outputs carry no timestamps, so a re-run with
the same config is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bounds import VIOLATION_TOL, beta, CurvatureBounds, verify_theorem1
from .graph import generate, gromov_delta, load_edge_list, pairs_at_distance, save_edge_list
from .runconfig import ConfigError, build_setup, build_train_config, parse_config
from .sensitivity import sensitivity_protocol
from .training import DivergenceError, train

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_DIVERGE = 3

SCHEMAS = {
    "sensitivity": (
        "sensitivity.csv columns: epoch,i,j,spectral_norm,frobenius_norm\n"
        "  one row per sampled pair; final summary row has i=j=-1 and the\n"
        "  mean spectral/frobenius norms.\n"
        "sensitivity.json keys: epoch,count,avg,min,max,frobenius_avg"
    ),
    "verify-bounds": (
        "bounds.csv columns: i,j,ell,empirical,bound,slack\n"
        "  empirical is the intrinsic spectral norm of the measured Jacobian\n"
        "  block, bound the certified curvature bound, slack = bound-empirical.\n"
        "bounds.json keys: violations,records,min_slack,max_slack,w,c_sigma,\n"
        "  beta,beta_heuristic,r_exp_max,r_log_max"
    ),
    "train": (
        "train.csv columns: epoch,loss,val_auc,sens_avg,sens_min,sens_max\n"
        "  sensitivity columns are empty on epochs without a report."
    ),
    "beta-table": "beta table columns: k,K,r_exp,r_log,beta ('invalid' outside the domain)",
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _print_schema(name: str) -> int:
    print(SCHEMAS[name])
    return EXIT_OK


# -- subcommand handlers -------------------------------------------------------


def _cmd_generate(args) -> int:
    params = {
        k: getattr(args, k)
        for k in ("depth", "r", "n", "c", "k", "seed")
        if getattr(args, k, None) is not None
    }
    g = generate(args.kind, **params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_edge_list(g, out)
    print(f"wrote {g.n} nodes / {g.m} edges to {out}")
    return EXIT_OK


def _cmd_hyperbolicity(args) -> int:
    g = load_edge_list(args.graph)
    delta = gromov_delta(g)
    print(f"n = {g.n}  m = {g.m}  delta = {_fmt(delta)}")
    json_path = Path(args.json) if args.json else Path(str(args.graph) + ".delta.json")
    _write_json(json_path, {"n": g.n, "m": g.m, "delta": delta})
    return EXIT_OK


def _cmd_sensitivity(args) -> int:
    if args.schema:
        return _print_schema("sensitivity")
    setup = build_setup(parse_config(args.config))
    if setup.model.depth != setup.distance:
        raise ConfigError(
            "protocol.distance must equal model.depth for the sensitivity protocol"
        )
    report = sensitivity_protocol(
        setup.model,
        setup.weights,
        setup.graph,
        setup.adjacency,
        setup.features,
        d=setup.distance,
        count=setup.pair_count,
        seed=setup.seed,
    )
    setup.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = setup.out_dir / "sensitivity.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,i,j,spectral_norm,frobenius_norm\n")
        for (i, j), sn, fr in zip(report.pairs, report.norms, report.frobenius):
            fh.write(f"{report.epoch},{i},{j},{_fmt(sn)},{_fmt(fr)}\n")
        fh.write(
            f"{report.epoch},-1,-1,{_fmt(report.avg)},{_fmt(np.mean(report.frobenius))}\n"
        )
    _write_json(
        setup.out_dir / "sensitivity.json",
        {
            "epoch": report.epoch,
            "count": len(report.pairs),
            "avg": report.avg,
            "min": report.min,
            "max": report.max,
            "frobenius_avg": float(np.mean(report.frobenius)),
        },
    )
    print(f"sensitivity over {len(report.pairs)} pairs: avg={report.avg:.6g} "
          f"min={report.min:.6g} max={report.max:.6g}")
    return EXIT_OK


def _sample_bound_pairs(setup):
    """Pairs for bound verification: a quota per distance 1..depth plus (0,0)."""
    depth = setup.model.depth
    quota = max(1, setup.pair_count // max(depth, 1))
    pairs = [(0, 0)]
    for d in range(1, depth + 1):
        try:
            pairs.extend(pairs_at_distance(setup.graph, d, quota, seed=setup.seed + d))
        except ValueError:
            continue  # no pair at this distance in this graph
    return pairs


def _cmd_verify_bounds(args) -> int:
    if args.schema:
        return _print_schema("verify-bounds")
    if args.recheck:
        return _recheck_bounds(Path(args.recheck))
    setup = build_setup(parse_config(args.config))
    depth = setup.model.depth
    if args.ell is not None and not (0 <= args.ell <= depth):
        raise ConfigError(f"--ell {args.ell} outside 0..depth={depth}")
    ells = [args.ell] if args.ell is not None else list(range(1, depth + 1))
    report = verify_theorem1(
        setup.model,
        setup.weights,
        setup.adjacency,
        setup.features,
        _sample_bound_pairs(setup),
        ells,
    )
    setup.out_dir.mkdir(parents=True, exist_ok=True)
    with open(setup.out_dir / "bounds.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("i,j,ell,empirical,bound,slack\n")
        for r in report.records:
            fh.write(
                f"{r.i},{r.j},{r.ell},{_fmt(r.empirical)},{_fmt(r.bound)},{_fmt(r.slack)}\n"
            )
    _write_json(
        setup.out_dir / "bounds.json",
        {
            "violations": report.violations,
            "records": len(report.records),
            "min_slack": report.min_slack,
            "max_slack": report.max_slack,
            "w": report.w,
            "c_sigma": report.c_sigma,
            "beta": report.beta_max,
            "beta_heuristic": report.beta_heuristic_max,
            "r_exp_max": report.r_exp_max,
            "r_log_max": report.r_log_max,
        },
    )
    print(
        f"checked {len(report.records)} records: violations={report.violations} "
        f"min_slack={report.min_slack:.3g}"
    )
    return EXIT_OK if report.violations == 0 else EXIT_VERIFY


def _recheck_bounds(csv_path: Path) -> int:
    """Negative-control mode: re-validate an existing bounds CSV."""
    if not csv_path.exists():
        raise ConfigError(f"recheck file not found: {csv_path}")
    violations = 0
    rows = 0
    with open(csv_path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "i,j,ell,empirical,bound,slack":
            raise ConfigError(f"unexpected bounds CSV header: {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise ConfigError(f"malformed bounds CSV row: {line.strip()!r}")
            empirical, bound, slack = map(float, parts[3:])
            if slack < -VIOLATION_TOL or (bound - empirical) < -VIOLATION_TOL:
                violations += 1
            rows += 1
    print(f"rechecked {rows} records: violations={violations}")
    return EXIT_OK if violations == 0 else EXIT_VERIFY


def _cmd_train(args) -> int:
    if args.schema:
        return _print_schema("train")
    conf = parse_config(args.config)
    setup = build_setup(conf)
    tc = build_train_config(conf)
    logs, _ = train(setup.model, tc, setup.graph, features=setup.features)
    setup.out_dir.mkdir(parents=True, exist_ok=True)
    with open(setup.out_dir / "train.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss,val_auc,sens_avg,sens_min,sens_max\n")
        for lg in logs:
            if lg.sensitivity is None:
                sens = ",,"
            else:
                s = lg.sensitivity
                sens = f"{_fmt(s.avg)},{_fmt(s.min)},{_fmt(s.max)}"
            fh.write(f"{lg.epoch},{_fmt(lg.loss)},{_fmt(lg.val_auc)},{sens}\n")
    print(f"trained {len(logs)} epochs; final loss {logs[-1].loss:.6g}")
    return EXIT_OK


def _cmd_beta_table(args) -> int:
    if args.schema:
        return _print_schema("beta-table")

    def parse_list(text):
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None

    k_list = parse_list(args.k_values)
    K_list = parse_list(args.K_values)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,K,r_exp,r_log,beta\n")
        for k in k_list:
            for K in K_list:
                prefix = f"{_fmt(k)},{_fmt(K)},{_fmt(args.r_exp)},{_fmt(args.r_log)}"
                if k > K:
                    fh.write(f"{prefix},invalid\n")
                    continue
                try:
                    val = beta(CurvatureBounds(k, K), args.r_exp, args.r_log)
                except ValueError:
                    fh.write(f"{prefix},invalid\n")
                    continue
                fh.write(f"{prefix},{_fmt(val)}\n")
    print(f"wrote beta table to {out}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvgnn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated graph as an edge list")
    g.add_argument("kind", choices=[
        "binary_tree", "rary_tree", "path", "cycle", "ring_of_cliques", "random_tree"
    ])
    g.add_argument("--depth", type=int)
    g.add_argument("--r", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--c", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    h = sub.add_parser("hyperbolicity", help="Gromov delta of an edge-list graph")
    h.add_argument("graph")
    h.add_argument("--json", help="output JSON path (default: <graph>.delta.json)")
    h.set_defaults(func=_cmd_hyperbolicity)

    s = sub.add_parser("sensitivity", help="Jacobian statistics over sampled pairs")
    s.add_argument("config", nargs="?")
    s.add_argument("--schema", action="store_true", help="print output schema and exit")
    s.set_defaults(func=_cmd_sensitivity)

    v = sub.add_parser("verify-bounds", help="check measured Jacobians against bounds")
    v.add_argument("config", nargs="?")
    v.add_argument("--ell", type=int, help="verify a single layer index")
    v.add_argument("--recheck", help="re-validate an existing bounds CSV")
    v.add_argument("--schema", action="store_true")
    v.set_defaults(func=_cmd_verify_bounds)

    t = sub.add_parser("train", help="link-prediction training with EpochLog CSV")
    t.add_argument("config", nargs="?")
    t.add_argument("--schema", action="store_true")
    t.set_defaults(func=_cmd_train)

    b = sub.add_parser("beta-table", help="curvature sweep of the heuristic factor")
    b.add_argument("--k-values", dest="k_values", default="-4,-2,-1,-0.5,0")
    b.add_argument("--K-values", dest="K_values", default="0,0.5,1")
    b.add_argument("--r-exp", dest="r_exp", type=float, default=1.0)
    b.add_argument("--r-log", dest="r_log", type=float, default=1.0)
    b.add_argument("--out", required=True)
    b.add_argument("--schema", action="store_true")
    b.set_defaults(func=_cmd_beta_table)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        needs_config = args.command in ("sensitivity", "verify-bounds", "train")
        if needs_config and not getattr(args, "schema", False) and not getattr(args, "recheck", None):
            if not args.config:
                raise ConfigError(f"'{args.command}' requires a run-config file")
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
