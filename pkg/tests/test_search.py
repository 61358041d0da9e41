from __future__ import annotations

import math

import numpy as np
import pytest

from subcount import generators as gen
from subcount.graph import degeneracy
from subcount.oracle import OracleHandle
from subcount.search import (AllAdviceRejected, GuessOracleSpec, SearchResult, SearchTrace,
                             TestableResult, _adaptive, _combine, adaptive_edges,
                             adaptive_triangles, amplification_count, repetition_schedule, search,
                             search_many)
from subcount.search import testable_edges as run_testable_edges
from subcount.search import testable_triangles as run_testable_triangles
from subcount.triangles import BadAdvice, RejectReason, run_triangle_batch


@pytest.mark.parametrize("eps", [0.1, 0.5, 0.9])
def test_repetition_schedule_is_a_fixed_point(eps):
    mass = 0.0
    for j in range(60):
        k, d = repetition_schedule(j, eps)
        assert k == math.ceil(8 * math.log(1 / d) / eps)
        assert d == pytest.approx(1 / (40 * (j + 1) ** 2 * k))
        mass += k * d
    assert mass < 1 / 24 <= 1 / 5


def test_exact_estimator_is_found_after_halving():
    v = 37.0
    res = search(GuessOracleSpec(lambda g, e, d: v, upper=16 * v), 0.25)
    assert res.value == v
    guesses = [r.guess for r in res.trace.records]
    assert guesses == [16 * v, 8 * v, 4 * v, 2 * v, v]
    assert len(guesses) <= math.ceil(math.log2(16 * v)) + 1
    assert res.trace.records[-1].accepted and res.trace.records[-1].runs == repetition_schedule(4, 0.25)[0]
    assert all(r.runs == 1 for r in res.trace.records[:-1])


def test_bad_advice_stops_after_one_call():
    calls = []

    def est(g, e, d):
        calls.append(g)
        return BadAdvice(RejectReason.HEAVY_EDGES)

    res = search(GuessOracleSpec(est, upper=1000.0), 0.5)
    assert isinstance(res.value, BadAdvice) and res.value.reason is RejectReason.HEAVY_EDGES
    assert res.trace.total_runs == 1 and len(calls) == 1


def test_zero_answer_walks_below_one():
    res = search(GuessOracleSpec(lambda g, e, d: 0.0, upper=64.0), 0.5)
    assert res.value == 0.0
    assert [r.guess for r in res.trace.records] == [64, 32, 16, 8, 4, 2, 1]


def test_batch_and_scalar_paths_agree():
    spec_a = GuessOracleSpec(lambda g, e, d: 5.0, upper=100.0)
    spec_b = GuessOracleSpec(None, upper=100.0,
                             batch=lambda g, e, d, c: (np.full(c, 5.0), np.zeros(c, np.int8)))
    a, b = search_many(spec_a, 0.3, 3), search_many(spec_b, 0.3, 3)
    assert [x.value for x in a] == [x.value for x in b] == [5.0] * 3
    assert [x.trace.total_runs for x in a] == [x.trace.total_runs for x in b]


def test_search_rejects_bad_eps():
    with pytest.raises(ValueError):
        search(GuessOracleSpec(lambda g, e, d: 1.0, upper=4.0), 1.0)


def test_amplification_count():
    assert amplification_count(0.1) == 67
    assert amplification_count(0.5) == 20
    with pytest.raises(ValueError):
        amplification_count(0.0)


def _r(v):
    return SearchResult(v, SearchTrace())


def test_combine_majority_and_median():
    bad = BadAdvice(RejectReason.DEGREE_SUM)
    out = _combine([_r(bad), _r(bad), _r(3.0)])
    assert out.bad_advice and out.value.reason is RejectReason.MAJORITY
    out = _combine([_r(bad), _r(1.0), _r(5.0), _r(2.0)])
    assert not out.bad_advice and out.value == 2.0     # ties do not reject
    assert _combine([_r(bad), _r(bad), _r(1.0), _r(4.0)]).value == 2.5


def test_adaptive_doubles_until_accepted():
    seen = []

    def run(advice, delta):
        seen.append((advice, delta))
        if advice < 8:
            return TestableResult(BadAdvice(RejectReason.MAJORITY), [], 1)
        return TestableResult(11.0, [], 1)

    res = _adaptive(run, 5, 0.2)
    assert res.value == 11.0 and res.advice == 8.0
    assert [a for a, _ in seen] == [2.0, 4.0, 8.0]
    assert all(d == pytest.approx(0.2 / 50) for _, d in seen)
    with pytest.raises(AllAdviceRejected) as exc:
        _adaptive(lambda a, d: TestableResult(BadAdvice(RejectReason.MAJORITY), [], 1), 3, 0.2)
    assert len(exc.value.attempts) == 3


def test_testable_triangles_on_a_tree_is_zero():
    g = gen.forest_union(40, 1, seed=0)
    res = run_testable_triangles(OracleHandle(g, seed=1), g.m, 0.5, 0.25, 1)
    assert res.value == 0.0 and res.repetitions == 40


def test_adaptive_triangles_on_a_tree():
    g = gen.forest_union(30, 1, seed=2)
    res = adaptive_triangles(OracleHandle(g, seed=3), g.m, 0.5, 0.5)
    assert res.value == 0.0 and res.advice == 2.0


def test_testable_edges_on_a_star():
    g = gen.star(50)
    res = run_testable_edges(OracleHandle(g, seed=4), g.n, 0.5, 0.25, 1)
    assert res.value == g.m


def test_adaptive_edges_on_a_path():
    g = gen.path(60)
    res = adaptive_edges(OracleHandle(g, seed=5), g.n, 0.5, 0.5)
    assert res.value == g.m and res.advice == 2.0


def test_testable_is_deterministic_given_seed():
    g, _ = gen.planted_clique(gen.forest_union(30, 2, seed=6), 6, seed=7)
    a = OracleHandle(g, seed=8)
    b = OracleHandle(g, seed=8)
    assert run_testable_triangles(a, g.m, 0.5, 0.25, 2).value == run_testable_triangles(b, g.m, 0.5, 0.25, 2).value
    assert a.ledger == b.ledger


def test_single_run_cost_falls_as_guess_grows():
    g, t = gen.planted_clique(gen.forest_union(40, 2, seed=9), 7, seed=10)
    medians = []
    for guess in (t / 4, t, 4 * t):
        b = run_triangle_batch(OracleHandle(g, seed=11), g.m, guess, 0.05, 0.1, 2, 30, per_run_ledgers=True)
        medians.append(float(np.median(b.tally.totals())))
    assert medians[0] > medians[1] > medians[2]


def test_doubling_costs_at_most_twenty_single_runs():
    g, _ = gen.planted_clique(gen.forest_union(40, 2, seed=1), 6, seed=2)
    advice = degeneracy(g)      # arboricity <= degeneracy <= 2 arboricity - 1
    sweep, single = [], []
    for s in range(5):
        o = OracleHandle(g, seed=s)
        adaptive_triangles(o, g.m, 0.5, 0.25)
        sweep.append(o.ledger.total)
        o = OracleHandle(g, seed=s)
        run_testable_triangles(o, g.m, 0.5, 0.25, advice)
        single.append(o.ledger.total)
    assert np.median(sweep) <= 20 * np.median(single)
