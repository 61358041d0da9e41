"""The acceptance suite: ten statistical and metering checks with a pass/fail table.

Each ``criterion_*`` function runs one check and returns a
:class:`CriterionResult`.  The pytest suite and ``subcount accept`` share
them.  Report lines depend only on the seed; wall times are checked against
each criterion's limit but printed only with ``verbose=True``.
"""
from __future__ import annotations

import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass
from math import comb

import numpy as np

from . import generators as gen
from .graph import brute_force_triangle_count, degeneracy, exact_triangle_count
from .harness import (ExperimentConfig, edge_cost_curve, forest_edge_family, planted_clique_family,
                      rows_to_csv, run_replicas, run_scaling_sweep)
from .edges import run_edge_batch
from .oracle import BudgetExhausted, OracleHandle
from .search import search_many, testable_triangles, triangle_guess_spec
from .triangles import (BadAdvice, HeavinessCache, TriangleRunConfig, approx_triangles_with_advice,
                        classify_edges, compute_thresholds, is_heavy, run_triangle_batch)


@dataclass
class CriterionResult:
    number: int
    title: str
    ok: bool
    detail: str
    seconds: float
    limit: float

    @property
    def passed(self) -> bool:
        return self.ok and self.seconds < self.limit

    def line(self, verbose: bool = False) -> str:
        status = "PASS" if self.passed else "FAIL"
        timing = f"{self.seconds:.1f}s of {self.limit:.0f}s" if verbose else (
            "in time" if self.seconds < self.limit else "over time limit")
        return f"{status} {self.number:2d} {self.title}: {self.detail} [{timing}]"


def _timed(number, title, limit, body):
    start = time.perf_counter()
    ok, detail = body()
    return CriterionResult(number, title, bool(ok), detail, time.perf_counter() - start, limit)


def binomial_slack(p: float, n: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(p * (1.0 - p) / n)


# 1 ---------------------------------------------------------------------------

def criterion_exact(seed: int = 0) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        bad = 0
        for i in range(50):
            n = int(rng.integers(10, 61))
            p = (0.1, 0.3)[i % 2]
            g = gen.erdos_renyi(n, p, seed=seed * 1000 + i)
            t, per_edge = exact_triangle_count(g, per_edge=True)
            if t != brute_force_triangle_count(g) or int(per_edge.sum()) != 3 * t:
                bad += 1
        return bad == 0, f"{50 - bad}/50 graphs agree with brute force and sum t(e) = 3t"

    return _timed(1, "exact-oracle equivalence", 5.0, body)


# 2 ---------------------------------------------------------------------------

def partition_graph():
    """Cliques of 40, 60 and 100 vertices on 200 vertices.

    At ``eps = 0.5``, advice 2 and guess 8 the triangle threshold is 48:
    40-clique edges are light, 60-clique edges sit in the free band and
    100-clique edges carry more than twice the threshold and must be heavy.
    """
    return gen.disjoint_union(gen.clique(40), gen.clique(60), gen.clique(100))


def partition_violations(g, oracle, th, delta, replays):
    _, t_edge = exact_triangle_count(g, per_edge=True)
    d_edge = g.edge_degrees()
    light = (d_edge <= th.tau_degree) & (t_edge <= th.tau_triangles)
    heavy = (d_edge > th.tau_degree) | (t_edge > 2 * th.tau_triangles)
    bad = 0
    for _ in range(replays):
        verdict = classify_edges(oracle, g.edges, th, delta, g.m, HeavinessCache())
        if np.any(verdict[light]) or not np.all(verdict[heavy]):
            bad += 1
    return bad


def criterion_partition(seed: int = 0) -> CriterionResult:
    def body():
        g = partition_graph()
        th = compute_thresholds(g.m, 0.5, 2.0, 8.0)
        bad = partition_violations(g, OracleHandle(g, seed=seed), th, 0.1, 500)
        frac = bad / 500
        return frac <= 0.12, f"violating replays {bad}/500 = {frac:.3f} <= 0.12"

    return _timed(2, "partition goodness", 60.0, body)


# 3 ---------------------------------------------------------------------------

COMPLETENESS_GRAPHS = ((2, 40), (4, 30), (8, 20))


def criterion_completeness(seed: int = 0, runs: int = 100) -> CriterionResult:
    def body():
        rates = []
        for advice, n in COMPLETENESS_GRAPHS:
            g = gen.forest_union(n, advice, seed=seed + advice)
            bad = 0
            for i in range(runs):
                res = testable_triangles(OracleHandle(g, seed=seed * 7919 + i), g.m, 0.2, 0.1, advice)
                bad += res.bad_advice
            rates.append(bad / runs)
        text = ", ".join(f"advice {a}: {r:.2f}" for (a, _), r in zip(COMPLETENESS_GRAPHS, rates))
        return max(rates) <= 0.20, f"bad-advice rate {text} (limit 0.20)"

    return _timed(3, "completeness", 600.0, body)


# 4 ---------------------------------------------------------------------------

def soundness_pool(seed: int = 0):
    """``(graph, t, advice)`` cases; advice 1 is wrong for every planted clique here."""
    out = []
    for n, alpha, k, advice in ((40, 2, 8, 1), (30, 3, 10, 1), (40, 2, 8, 2), (24, 2, 12, 1)):
        g, t = gen.planted_clique(gen.forest_union(n, alpha, seed=seed + n), k, seed=seed + k)
        out.append((g, t, advice))
    return out


def criterion_soundness(seed: int = 0, runs: int = 100) -> CriterionResult:
    def body():
        pool = soundness_pool(seed)
        good = emitted = 0
        for i in range(runs):
            g, t, advice = pool[i % len(pool)]
            res = testable_triangles(OracleHandle(g, seed=seed * 104729 + i), g.m, 0.2, 0.1, advice)
            if not res.bad_advice:
                emitted += 1
                good += abs(res.value - t) <= 0.2 * t
        frac = good / emitted if emitted else 1.0
        return frac >= 0.85, f"{good}/{emitted} emitted estimates within 20% ({runs - emitted} bad advice)"

    return _timed(4, "soundness", 600.0, body)


# 5 ---------------------------------------------------------------------------

ADVERSARIAL = dict(n=40, advice=2, t=512)


def criterion_adversarial(seed: int = 0, runs: int = 50) -> CriterionResult:
    def body():
        eps = 0.2
        two, info_two = gen.lower_bound_family("two", seed=seed, **ADVERSARIAL)
        one, info_one = gen.lower_bound_family("one", seed=seed, **ADVERSARIAL)
        target = comb(info_two.clique_size, 3)
        ok_two = ok_one = 0
        for i in range(runs):
            r2 = testable_triangles(OracleHandle(two, seed=seed * 31 + i), two.m, eps, 0.1,
                                    ADVERSARIAL["advice"])
            ok_two += r2.bad_advice or abs(r2.value - target) <= eps * target
            r1 = testable_triangles(OracleHandle(one, seed=seed * 37 + i), one.m, eps, 0.1,
                                    ADVERSARIAL["advice"])
            ok_one += r1.bad_advice or r1.value <= eps * one.m ** 1.5
        same = (info_one.n_total, info_one.m_total) == (info_two.n_total, info_two.m_total)
        return (ok_two == runs and ok_one == runs and same,
                f"kind two {ok_two}/{runs} bad advice or within 20% of C({info_two.clique_size},3)"
                f"={target}; kind one {ok_one}/{runs} below eps*m^1.5; sizes equal {same}")

    return _timed(5, "adversarial family", 600.0, body)


# 6 ---------------------------------------------------------------------------

def criterion_upper_bias(seed: int = 0, runs: int = 10_000) -> CriterionResult:
    def body():
        g, t = gen.planted_clique(gen.forest_union(30, 2, seed=seed), 7, seed=seed + 1)
        oracle = OracleHandle(g, seed=seed)
        batch = run_triangle_batch(oracle, g.m, 2.0 * t, 0.2, 0.1, 2.0, runs, shadow=True)
        est = batch.shadow
        mean, sd = float(est.mean()), float(est.std(ddof=1))
        limit = t + 3.0 * sd / math.sqrt(runs)
        return mean <= limit, f"mean {mean:.3f} <= t + 3 SD/100 = {limit:.3f} (t={t}, guess 2t)"

    return _timed(6, "upper bias", 300.0, body)


# 7 ---------------------------------------------------------------------------

def criterion_edges(seed: int = 0, runs: int = 200) -> CriterionResult:
    def body():
        delta = 0.1
        slack = binomial_slack(delta, runs)
        # gate completeness: arboricity 2 graph, advice 2
        g = gen.forest_union(10_000, 2, seed=seed)
        b = run_edge_batch(OracleHandle(g, seed=seed), g.n, g.m, 0.5, delta, 2.0, runs)
        reject = float(b.rejected.mean())
        # accuracy: a tree, advice 1, guess m/2, main loop smaller than n
        eps = 0.36
        tree = gen.forest_union(500_000, 1, seed=seed + 1)
        acc = run_edge_batch(OracleHandle(tree, seed=seed + 1), tree.n, tree.m / 2, eps, delta, 1.0,
                             runs)
        band = 10.0 * eps / 6.0
        inside = np.abs(acc.value - tree.m) <= band * tree.m
        good = float(np.mean(inside))          # rejected runs count as misses
        worst = float(np.nanmax(np.abs(acc.value - tree.m)) / tree.m)
        # clique with advice 1: every edge degree exceeds the cap
        k = gen.clique(40)
        b = run_edge_batch(OracleHandle(k, seed=seed + 2), k.n, k.m, 0.5, delta, 1.0, runs)
        caught = float(b.rejected.mean())
        ok = (reject <= delta + slack and good >= 1 - delta - slack and caught >= 1 - delta - slack
              and not acc.exact_branch)
        return ok, (f"gate rejects {reject:.3f} <= {delta + slack:.3f}; "
                    f"within (1 +- {band:.2f})m {good:.3f} (worst rel err {worst:.3f}, q={acc.q}); "
                    f"clique rejected {caught:.3f}")

    return _timed(7, "edge estimator", 300.0, body)


# 8 ---------------------------------------------------------------------------

def search_benchmarks(seed: int = 0):
    out = []
    for n, alpha, k in ((40, 2, 6), (30, 3, 8), (25, 2, 10)):
        g, t = gen.planted_clique(gen.forest_union(n, alpha, seed=seed + n), k, seed=seed + k)
        out.append((g, t, degeneracy(g)))
    return out


def criterion_search(seed: int = 0, runs: int = 100) -> CriterionResult:
    def body():
        eps = 0.2
        wins = []
        for i, (g, t, advice) in enumerate(search_benchmarks(seed)):
            spec = triangle_guess_spec(OracleHandle(g, seed=seed + i), g.m, advice, eps / 20.0)
            res = search_many(spec, eps, runs)
            wins.append(sum(not isinstance(r.value, BadAdvice) and abs(r.value - t) <= eps * t
                            for r in res))
        return min(wins) >= 75, f"successes per graph {wins} of {runs} (need 75)"

    return _timed(8, "search contract", 900.0, body)


# 9 ---------------------------------------------------------------------------

def criterion_scaling(seed: int = 0, seeds: int = 11) -> CriterionResult:
    def body():
        tri = run_scaling_sweep(planted_clique_family(60, 2, (15, 20, 25, 30), 2.0, seed),
                                0.5, 0.25, seeds=seeds, base_seed=seed)
        edg = run_scaling_sweep(forest_edge_family(2000, (1, 2, 4, 8), seed),
                                0.5, 0.25, seeds=seeds, edges=True, base_seed=seed)
        return (tri.spread <= 10.0 and edg.spread <= 10.0,
                f"measured/curve spread triangles {tri.spread:.2f}, edges {edg.spread:.2f} (limit 10)")

    return _timed(9, "scaling shape", 900.0, body)


# 10 --------------------------------------------------------------------------

@contextmanager
def _env(key, value):
    old = os.environ.get(key)
    os.environ[key] = value
    try:
        yield
    finally:
        if old is None:
            del os.environ[key]
        else:
            os.environ[key] = old


def criterion_metering(seed: int = 0) -> CriterionResult:
    def body():
        cfg = ExperimentConfig("clique:k=6", "single-guess", 0.2, 0.1, advice=2.0, guess=20.0,
                               replicas=20, seed=seed)
        with _env("SC_THREADS", "1"):
            a = rows_to_csv(run_replicas(cfg))
        with _env("SC_THREADS", "4"):
            b = rows_to_csv(run_replicas(cfg))
        same = a == b

        g = partition_graph()
        th = compute_thresholds(g.m, 0.5, 2.0, 8.0)
        oracle = OracleHandle(g, seed=seed)
        cache = HeavinessCache()
        edge = tuple(int(x) for x in g.edges[-1])        # inside the 100-clique
        is_heavy(oracle, edge, th, 0.1, g.m, cache)
        first = oracle.ledger.copy()
        is_heavy(oracle, edge, th, 0.1, g.m, cache)
        extra = oracle.ledger - first
        memo = first.neighbor > 0 and extra.neighbor == 0 and extra.pair == 0

        small = gen.clique(6)
        run_cfg = TriangleRunConfig(small.m, 0.2, 0.1, 2.0, 20.0, seed=seed)
        full = approx_triangles_with_advice(OracleHandle(small), run_cfg).ledger.total
        budget = full - 1
        capped = OracleHandle(small, budget=budget)
        try:
            approx_triangles_with_advice(capped, run_cfg)
            fired = False
        except BudgetExhausted as exc:
            fired = exc.ledger.total == budget
        approx_triangles_with_advice(OracleHandle(small, budget=full), run_cfg)
        return (same and memo and fired,
                f"CSV identical across worker counts {same}; cached verdict adds no queries {memo}; "
                f"budget {budget} stops run needing {full} at query {budget + 1} {fired}")

    return _timed(10, "determinism and metering", 60.0, body)


CRITERIA = {
    1: criterion_exact,
    2: criterion_partition,
    3: criterion_completeness,
    4: criterion_soundness,
    5: criterion_adversarial,
    6: criterion_upper_bias,
    7: criterion_edges,
    8: criterion_search,
    9: criterion_scaling,
    10: criterion_metering,
}


def run_acceptance(seed: int = 0, only=None, verbose: bool = False, stream=None) -> int:
    """Run the selected criteria, print one line each; 0 iff all pass."""
    stream = stream or sys.stdout
    results = []
    for number, fn in CRITERIA.items():
        if only and number not in only:
            continue
        res = fn(seed)
        results.append(res)
        print(res.line(verbose), file=stream, flush=True)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=stream)
    return 0 if passed == len(results) else 1
