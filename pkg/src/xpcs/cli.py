"""Command-line entry point ``xpcs``."""

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import harness
from .expander import ExpansionParams, SensingOperator, generate_expander, read_graph, sample_expansion, write_graph
from .recovery.spiral import SolverConfig, pmle_spiral_l1
from .recovery.whales import whale_isolation


def read_counts(path):
    """Nonnegative integer counts separated by commas, whitespace or newlines."""
    tokens = [t for t in re.split(r"[,\s]+", Path(path).read_text()) if t]
    values = np.array([float(t) for t in tokens])
    if np.any(values < 0) or np.any(values != np.round(values)):
        raise ValueError(f"{path}: counts must be nonnegative integers")
    return values.astype(np.int64)


def write_estimate(values, path):
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in values))


def _gen_graph(args):
    graph = generate_expander(args.n, args.m, args.d, args.seed)
    write_graph(graph, args.out)
    return 0


def _check(args):
    graph = read_graph(args.graph)
    report = sample_expansion(graph, ExpansionParams(args.k, args.eps), args.trials, args.seed)
    print("trials,min_expansion,min_rip1,max_right_degree")
    print(report.csv_row())
    return 0


def _recover(args):
    graph = read_graph(args.graph)
    y = read_counts(args.y)
    result = pmle_spiral_l1(y, SensingOperator(graph), args.tau, SolverConfig(max_iters=args.max_iters))
    write_estimate(result.estimate.values, args.out)
    if not result.converged:
        print(f"warning: stopped after {result.iterations} iterations without converging", file=sys.stderr)
    return 0


def _whales(args):
    graph = read_graph(args.graph)
    result = whale_isolation(read_counts(args.y), graph, args.k)
    print(",".join(str(int(i)) for i in result.v1))
    return 0


def _flows(args):
    cfg = harness.ExperimentConfig(
        "flows_vs_k",
        trials=args.trials,
        seed=args.seed,
        params={
            "n": args.n, "m": args.m, "d": args.d, "alpha": args.alpha, "l0": args.l0,
            "rho": args.rho, "nu_list": [args.nu], "k_list": [args.k],
        },
    )
    record = harness.run_flows_comparison(cfg)
    if args.scheme != "both":
        record = harness.SweepRecord(record.columns, [r for r in record.rows if r[1] == args.scheme])
    text = record.to_csv(args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _bench(args):
    if args.config:
        cfg = harness.ExperimentConfig.load(args.config)
        if cfg.experiment != args.experiment:
            print(f"config is for {cfg.experiment}, not {args.experiment}", file=sys.stderr)
            return 2
    else:
        cfg = harness.ExperimentConfig(args.experiment)
    if args.workers:
        cfg = harness.ExperimentConfig(cfg.experiment, cfg.trials, cfg.seed, args.workers, cfg.out, cfg.params)
    out = Path(args.out or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    record = harness.run_experiment(cfg)
    record.to_csv(out / f"{cfg.experiment}.csv")
    checks = harness.check_record(cfg.experiment, record)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    return 0 if all(ok for _, ok, _ in checks) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="xpcs", description="Expander-graph sensing under Poisson noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="draw a random left-regular graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_gen_graph)

    p = sub.add_parser("check", help="sampled expansion and RIP-1 report")
    p.add_argument("--graph", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eps", type=float, default=1.0 / 16.0)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_check)

    p = sub.add_parser("recover", help="l1-penalized Poisson MLE from counts")
    p.add_argument("--graph", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_recover)

    p = sub.add_parser("whales", help="print the flows kept by whale isolation")
    p.add_argument("--graph", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=_whales)

    p = sub.add_parser("flows", help="compare the direct and pMLE rate estimators")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--m", type=int, default=800)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--l0", type=float, default=1000.0)
    p.add_argument("--rho", type=float, default=100.0)
    p.add_argument("--nu", type=int, default=40)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--scheme", choices=("direct", "staggered", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_flows)

    p = sub.add_parser("bench", help="run an experiment and its embedded assertions")
    p.add_argument("experiment", choices=sorted(harness.DEFAULTS))
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"xpcs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
