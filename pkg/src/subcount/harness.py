"""Seeded experiment runner and CSV output.

Replica ``i`` of an experiment with base seed ``s`` runs on its own
:class:`OracleHandle` seeded with ``s + i``.  Replicas may run on several
threads (``SC_THREADS`` caps the count) but rows are always written in
replica order, so the CSV depends only on the configuration.
"""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import generators as gen
from .edgelist import EdgeListFormatError, read_edge_list
from .edges import EdgeRunConfig, approx_edges_with_advice
from .graph import Graph, GraphInvariantError, exact_triangle_count
from .oracle import BudgetExhausted, OracleHandle, QueryLedger
from .search import (AllAdviceRejected, adaptive_edges, adaptive_triangles, testable_edges,
                     testable_triangles)
from .triangles import BadAdvice, TriangleRunConfig, approx_triangles_with_advice

CSV_HEADER = ("seed", "graph_id", "exact", "kind", "estimate", "rel_err",
              "q_degree", "q_neighbor", "q_pair", "q_edge", "q_vertex", "ms")

ALGORITHMS = ("triangles-testable", "triangles-adaptive", "edges-testable", "edges-adaptive",
              "single-guess", "single-guess-edges")

EXIT_OK = 0
EXIT_UNREADABLE = 2
EXIT_INVALID = 3


class ConfigError(ValueError):
    """An experiment parameter is invalid; ``field`` names it."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class GraphSourceError(ValueError):
    """The graph source cannot be read or parsed."""


def counts_edges(algorithm: str) -> bool:
    return algorithm.startswith("edges") or algorithm == "single-guess-edges"


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str
    algorithm: str
    eps: float
    delta: float
    advice: float | None = None
    guess: float | None = None
    replicas: int = 1
    seed: int = 0
    budget: int | None = None
    out: str | None = None
    timing: bool = False

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algo", f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if not 0 < self.eps < 1:
            raise ConfigError("eps", f"must lie in (0, 1), got {self.eps}")
        if not 0 < self.delta < 1:
            raise ConfigError("delta", f"must lie in (0, 1), got {self.delta}")
        if self.replicas < 1:
            raise ConfigError("replicas", f"must be at least 1, got {self.replicas}")
        needs_advice = not self.algorithm.endswith("adaptive")
        if needs_advice and self.advice is None:
            raise ConfigError("advice", f"required by {self.algorithm}")
        if self.advice is not None and not self.advice > 0:
            raise ConfigError("advice", f"must be positive, got {self.advice}")
        if self.algorithm.startswith("single-guess") and self.guess is None:
            raise ConfigError("guess", f"required by {self.algorithm}")
        if self.guess is not None and not self.guess > 0:
            raise ConfigError("guess", f"must be positive, got {self.guess}")
        if self.budget is not None and self.budget < 0:
            raise ConfigError("budget", f"must be non-negative, got {self.budget}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be non-negative, got {self.seed}")


@dataclass
class ResultRow:
    seed: int
    graph_id: str
    exact: int
    kind: str                # estimate | bad-advice | all-rejected | budget-exhausted
    estimate: float | None
    ledger: QueryLedger
    ms: float | None = None

    @property
    def rel_err(self) -> float | None:
        if self.kind != "estimate":
            return None
        if self.exact == 0:
            return 0.0 if self.estimate == 0 else math.inf
        return abs(self.estimate - self.exact) / self.exact

    def cells(self) -> list[str]:
        q = self.ledger
        return [str(self.seed), self.graph_id, str(self.exact), self.kind,
                _fmt(self.estimate), _fmt(self.rel_err),
                str(q.degree), str(q.neighbor), str(q.pair), str(q.uniform_edge),
                str(q.uniform_vertex), "" if self.ms is None else f"{self.ms:.3f}"]


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


# -- graph sources ----------------------------------------------------------

_GRAPH_CACHE: dict[str, Graph] = {}
_EXACT_CACHE: dict[tuple[str, str], int] = {}


def _parse_params(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, value = part.partition("=")
        if not sep:
            raise GraphSourceError(f"expected key=value, got {part!r}")
        out[key.strip()] = value.strip()
    return out


def _build(kind: str, p: dict[str, str]) -> Graph:
    def geti(key, default=None):
        if key not in p:
            if default is None:
                raise GraphSourceError(f"{kind} needs parameter {key!r}")
            return default
        return int(p[key])

    seed = geti("seed", 0)
    if kind == "forest-union":
        g = gen.forest_union(geti("n"), geti("alpha"), seed=seed)
    elif kind == "er":
        g = gen.erdos_renyi(geti("n"), float(p["p"]), seed=seed)
    elif kind == "clique":
        return gen.clique(geti("k"))
    elif kind == "path":
        return gen.path(geti("n"))
    elif kind == "star":
        return gen.star(geti("n"))
    elif kind == "lower-bound":
        g, _ = gen.lower_bound_family(p.get("kind", "two"), geti("n"), geti("advice"), geti("t"),
                                      seed=seed)
        return g
    else:
        raise GraphSourceError(f"unknown generator {kind!r}")
    plant = geti("plant", 0)
    if plant:
        g, _ = gen.planted_clique(g, plant, seed=seed + 1)
    return g


def load_graph(source: str) -> tuple[str, Graph]:
    """``(graph_id, graph)`` for a generator spec or an edge-list path.

    A generator spec looks like ``forest-union:n=1000,alpha=4,plant=20,seed=1``.
    Known generators: forest-union, er, clique, path, star, lower-bound; the
    first two accept ``plant=k`` to add a ``k``-clique on existing vertices.
    Anything that is an existing file, or has no ``:``, is read as an edge list.
    """
    if source in _GRAPH_CACHE:
        return source, _GRAPH_CACHE[source]
    kind, sep, rest = source.partition(":")
    if sep and not Path(source).exists():
        try:
            g = _build(kind.strip(), _parse_params(rest))
        except (ValueError, KeyError) as exc:
            if isinstance(exc, GraphSourceError):
                raise
            raise GraphSourceError(f"bad generator spec {source!r}: {exc}") from exc
    else:
        try:
            g = read_edge_list(source)
        except OSError as exc:
            raise GraphSourceError(f"cannot read {source}: {exc}") from exc
        except (EdgeListFormatError, GraphInvariantError) as exc:
            raise GraphSourceError(f"{source}: {exc}") from exc
    _GRAPH_CACHE[source] = g
    return source, g


def exact_value(graph_id: str, g: Graph, edges: bool) -> int:
    key = (graph_id, "m" if edges else "t")
    if key not in _EXACT_CACHE:
        _EXACT_CACHE[key] = g.m if edges else exact_triangle_count(g)
    return _EXACT_CACHE[key]


# -- replicas ---------------------------------------------------------------

def _one_replica(cfg: ExperimentConfig, g: Graph, graph_id: str, exact: int, seed: int) -> ResultRow:
    oracle = OracleHandle(g, seed=seed, budget=cfg.budget)
    start = time.perf_counter()
    kind, value = "estimate", None
    try:
        algo = cfg.algorithm
        if algo == "triangles-testable":
            res = testable_triangles(oracle, g.m, cfg.eps, cfg.delta, cfg.advice).value
        elif algo == "edges-testable":
            res = testable_edges(oracle, g.n, cfg.eps, cfg.delta, cfg.advice).value
        elif algo == "triangles-adaptive":
            res = adaptive_triangles(oracle, g.m, cfg.eps, cfg.delta).value
        elif algo == "edges-adaptive":
            res = adaptive_edges(oracle, g.n, cfg.eps, cfg.delta).value
        elif algo == "single-guess":
            res = approx_triangles_with_advice(
                oracle, TriangleRunConfig(g.m, cfg.eps, cfg.delta, cfg.advice, cfg.guess))
        else:
            res = approx_edges_with_advice(
                oracle, EdgeRunConfig(g.n, cfg.eps, cfg.delta, cfg.advice, cfg.guess))
        if isinstance(res, BadAdvice):
            kind = "bad-advice"
        else:
            value = float(getattr(res, "value", res))
        ledger = oracle.ledger
    except AllAdviceRejected:
        kind, ledger = "all-rejected", oracle.ledger
    except BudgetExhausted as exc:
        kind, ledger = "budget-exhausted", exc.ledger
    ms = (time.perf_counter() - start) * 1000.0 if cfg.timing else None
    return ResultRow(seed, graph_id, exact, kind, value, ledger.copy(), ms)


def worker_count(jobs: int) -> int:
    cap = os.environ.get("SC_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))


def run_replicas(cfg: ExperimentConfig) -> list[ResultRow]:
    """Validate ``cfg``, load the graph and run every replica; rows in replica order."""
    cfg.validate()
    graph_id, g = load_graph(cfg.graph)
    if g.m == 0:
        raise ConfigError("graph", "graph has no edges")
    exact = exact_value(graph_id, g, counts_edges(cfg.algorithm))
    if not counts_edges(cfg.algorithm):
        g.third_vertex_csr  # build shared lookup tables before threads start
    seeds = [cfg.seed + i for i in range(cfg.replicas)]
    workers = worker_count(cfg.replicas)
    if workers == 1:
        return [_one_replica(cfg, g, graph_id, exact, s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: _one_replica(cfg, g, graph_id, exact, s), seeds))


def rows_to_csv(rows, header=CSV_HEADER) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row.cells() if isinstance(row, ResultRow) else row)
    return buf.getvalue()


def write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        print(text, end="")
    else:
        Path(out).write_text(text)


def run_experiment(cfg: ExperimentConfig) -> tuple[int, str]:
    """Run ``cfg`` and write its CSV; returns ``(exit_code, message)``."""
    try:
        rows = run_replicas(cfg)
    except ConfigError as exc:
        return EXIT_INVALID, f"invalid parameter {exc}"
    except GraphSourceError as exc:
        return EXIT_UNREADABLE, str(exc)
    except (ValueError, gen.LowerBoundParameterError) as exc:
        return EXIT_INVALID, f"invalid parameter: {exc}"
    write_output(rows_to_csv(rows), cfg.out)
    return EXIT_OK, f"{len(rows)} rows"


# -- scaling sweeps -----------------------------------------------------------

SWEEP_HEADER = ("instance", "n", "m", "exact", "advice", "median_queries", "curve", "ratio")


@dataclass(frozen=True)
class SweepInstance:
    label: str
    graph: Graph
    exact: int
    advice: float
    curve: float


@dataclass
class SweepResult:
    instances: list
    medians: list = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        return np.array(self.medians, dtype=float) / np.array([i.curve for i in self.instances])

    @property
    def spread(self) -> float:
        r = self.ratios
        return float(r.max() / r.min())

    def csv(self) -> str:
        rows = []
        for inst, med, ratio in zip(self.instances, self.medians, self.ratios):
            rows.append([inst.label, inst.graph.n, inst.graph.m, inst.exact, repr(float(inst.advice)),
                         repr(float(med)), repr(float(inst.curve)), repr(float(ratio))])
        rows.append(["summary", "", "", "", "", "", "", repr(self.spread)])
        return rows_to_csv(rows, SWEEP_HEADER)


def triangle_cost_curve(m: int, advice: float, t: int) -> float:
    return m * advice / t + m / t ** (2.0 / 3.0)


def edge_cost_curve(n: int, advice: float, m: int) -> float:
    return n * advice / m


def planted_clique_family(n: int, alpha: int, sizes, advice: float, seed: int = 0) -> list[SweepInstance]:
    """One forest-union base with a clique of each size planted on it."""
    base = gen.forest_union(n, alpha, seed=seed)
    out = []
    for k in sizes:
        g, t = gen.planted_clique(base, int(k), seed=seed + int(k))
        out.append(SweepInstance(f"clique-{k}", g, t, float(advice), triangle_cost_curve(g.m, advice, t)))
    return out


def advice_doubling_family(n: int, alpha: int, k: int, advices, seed: int = 0) -> list[SweepInstance]:
    """One planted-clique graph swept over several advice values."""
    g, t = gen.planted_clique(gen.forest_union(n, alpha, seed=seed), k, seed=seed + k)
    return [SweepInstance(f"advice-{a:g}", g, t, float(a), triangle_cost_curve(g.m, a, t))
            for a in advices]


def forest_edge_family(n: int, alphas, seed: int = 0) -> list[SweepInstance]:
    out = []
    for a in alphas:
        g = gen.forest_union(n, int(a), seed=seed + int(a))
        out.append(SweepInstance(f"alpha-{a}", g, g.m, float(a), edge_cost_curve(n, a, g.m)))
    return out


def run_scaling_sweep(instances, eps: float, delta: float, seeds: int = 11, edges: bool = False,
                      base_seed: int = 0) -> SweepResult:
    """Median total queries of the testable estimator per instance over ``seeds`` seeds."""
    if seeds < 1:
        raise ConfigError("seeds", f"must be at least 1, got {seeds}")
    result = SweepResult(list(instances))
    for inst in result.instances:
        totals = []
        for i in range(seeds):
            oracle = OracleHandle(inst.graph, seed=base_seed + i)
            if edges:
                testable_edges(oracle, inst.graph.n, eps, delta, inst.advice)
            else:
                testable_triangles(oracle, inst.graph.m, eps, delta, inst.advice)
            totals.append(oracle.ledger.total)
        result.medians.append(float(np.median(totals)))
    return result
