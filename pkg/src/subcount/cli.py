"""Command-line entry point: ``subcount <command> ...``."""
from __future__ import annotations

import argparse
import sys

from .edgelist import validate_edge_list, write_edge_list
from .graph import degeneracy, exact_triangle_count
from .harness import (
    ALGORITHMS,
    EXIT_INVALID,
    EXIT_OK,
    EXIT_UNREADABLE,
    ConfigError,
    ExperimentConfig,
    GraphSourceError,
    advice_doubling_family,
    forest_edge_family,
    load_graph,
    planted_clique_family,
    run_experiment,
    run_scaling_sweep,
    write_output,
)


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_generate(args) -> int:
    try:
        _, g = load_graph(args.spec)
    except (GraphSourceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_edge_list(g, args.out)
    print(f"wrote n={g.n} m={g.m} to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    code, msg = validate_edge_list(args.path)
    print(msg, file=sys.stdout if code == 0 else sys.stderr)
    return code


def cmd_count_exact(args) -> int:
    try:
        _, g = load_graph(args.graph)
    except GraphSourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREADABLE
    print(f"n={g.n} m={g.m} triangles={exact_triangle_count(g)} degeneracy={degeneracy(g)}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = ExperimentConfig(graph=args.graph, algorithm=args.algo, eps=args.eps, delta=args.delta,
                           advice=args.advice, guess=args.guess, replicas=args.replicas,
                           seed=args.seed, budget=args.budget, out=args.out, timing=args.timing)
    code, msg = run_experiment(cfg)
    if code != EXIT_OK:
        print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_sweep(args) -> int:
    try:
        if args.family == "planted":
            fam = planted_clique_family(args.n, args.alpha, _ints(args.values), args.advice, args.seed)
        elif args.family == "advice":
            fam = advice_doubling_family(args.n, args.alpha, args.clique, _ints(args.values), args.seed)
        else:
            fam = forest_edge_family(args.n, _ints(args.values), args.seed)
        res = run_scaling_sweep(fam, args.eps, args.delta, seeds=args.seeds,
                                edges=args.family == "edges", base_seed=args.seed)
    except ConfigError as exc:
        print(f"error: invalid parameter {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_output(res.csv(), args.out)
    return EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import run_acceptance

    return run_acceptance(seed=args.seed, only=_ints(args.only) if args.only else None,
                          verbose=args.verbose)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subcount", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated graph as an edge list")
    g.add_argument("spec", help="generator spec, e.g. forest-union:n=1000,alpha=4,plant=20,seed=1")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="check an edge-list file (exit 0, 2 malformed, 3 invariant)")
    v.add_argument("path")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("count-exact", help="exact triangle count, edge count and degeneracy")
    c.add_argument("graph")
    c.set_defaults(func=cmd_count_exact)

    e = sub.add_parser("estimate", help="run seeded replicas of an estimator and write CSV")
    e.add_argument("graph", help="edge-list path or generator spec")
    e.add_argument("--algo", choices=ALGORITHMS, default="triangles-testable")
    e.add_argument("--eps", type=float, default=0.2)
    e.add_argument("--delta", type=float, default=0.1)
    e.add_argument("--advice", type=float)
    e.add_argument("--guess", type=float)
    e.add_argument("--replicas", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--budget", type=int)
    e.add_argument("--out", help="CSV path (stdout if omitted)")
    e.add_argument("--timing", action="store_true", help="fill the ms column (output no longer reproducible)")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sweep", help="median query counts against the cost curve")
    s.add_argument("--family", choices=("planted", "advice", "edges"), default="planted")
    s.add_argument("--n", type=int, default=60)
    s.add_argument("--alpha", type=int, default=2)
    s.add_argument("--values", default="15,20,25,30",
                   help="clique sizes (planted), advice values (advice) or forest counts (edges)")
    s.add_argument("--clique", type=int, default=20, help="clique size for the advice family")
    s.add_argument("--advice", type=float, default=2.0)
    s.add_argument("--eps", type=float, default=0.5)
    s.add_argument("--delta", type=float, default=0.25)
    s.add_argument("--seeds", type=int, default=11)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("accept", help="run the acceptance suite and print a pass/fail table")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--only", help="comma-separated criterion numbers")
    a.add_argument("--verbose", action="store_true", help="print wall times")
    a.set_defaults(func=cmd_accept)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
