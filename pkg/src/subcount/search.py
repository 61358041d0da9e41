"""Removing the need for a count guess, then for the advice itself.

:func:`search` turns an estimator that needs a guess ``g`` of the answer into
one that does not.  It walks down ``U, U/2, U/4, ...`` and at each guess takes
the minimum of several independent estimates, stopping at the first guess the
minimum does not contradict.  :func:`testable_triangles` and
:func:`testable_edges` repeat the search and combine the repetitions by
majority and median.  :func:`adaptive_triangles` and :func:`adaptive_edges`
additionally double the advice until it stops being rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .edges import run_edge_batch
from .oracle import OracleHandle
from .triangles import BadAdvice, RejectReason, run_triangle_batch

# repetitions at a guess grow by this factor until rejected or complete
_CHUNK_GROWTH = 8

# rejection codes returned by batched estimators
_REASONS = {1: RejectReason.DEGREE_SUM, 2: RejectReason.HEAVY_FRACTION, 3: RejectReason.HEAVY_EDGES}


class AllAdviceRejected(RuntimeError):
    """Every advice value in the doubling schedule was rejected."""

    def __init__(self, attempts):
        super().__init__(f"all {len(attempts)} advice values were rejected")
        self.attempts = attempts


@dataclass
class GuessOracleSpec:
    """An estimator parametrised by a guess of its answer.

    ``estimate(guess, eps, delta)`` returns a number or :class:`BadAdvice`.
    ``batch(guess, eps, delta, count)``, when given, runs ``count``
    independent estimates at once and returns ``(values, codes)`` arrays,
    where a non-zero code marks a rejection (1 degree sum, 2 heavy fraction,
    3 heavy edges); it must be distributed exactly like ``count`` calls to
    ``estimate``.
    ``upper`` bounds the true answer and ``exponent`` is the power of
    ``1/guess`` in the estimator's cost, kept for reporting.
    """
    estimate: Callable | None
    upper: float
    exponent: float = 2.0
    batch: Callable | None = None

    def run(self, guess: float, eps: float, delta: float, count: int):
        if self.batch is not None:
            values, codes = self.batch(guess, eps, delta, count)
            return np.asarray(values, dtype=np.float64), np.asarray(codes, dtype=np.int8)
        values = np.full(count, np.nan)
        codes = np.zeros(count, dtype=np.int8)
        back = {v: k for k, v in _REASONS.items()}
        for i in range(count):
            out = self.estimate(guess, eps, delta)
            if isinstance(out, BadAdvice):
                codes[i] = back.get(out.reason, 1)
            else:
                values[i] = float(getattr(out, "value", out))
        return values, codes


@lru_cache(maxsize=None)
def repetition_schedule(j: int, eps: float) -> tuple[int, float]:
    """``(k_j, delta_j)`` for the ``j``-th guess (``j`` from 0).

    ``k_j = ceil(8 ln(1/delta_j) / eps)`` with ``delta_j = 1/(40 (j+1)^2 k_j)``,
    solved by fixed-point iteration.  Then ``sum_j k_j delta_j < 1/24``.
    """
    k = 1
    for _ in range(200):
        nxt = int(math.ceil(8.0 * math.log(40.0 * (j + 1) ** 2 * k) / eps))
        if nxt == k:
            break
        k = nxt
    return k, 1.0 / (40.0 * (j + 1) ** 2 * k)


@dataclass
class GuessRecord:
    guess: float
    delta: float
    planned: int
    runs: int = 0
    minimum: float = math.inf
    accepted: bool = False
    bad_advice: bool = False


@dataclass
class SearchTrace:
    records: list = field(default_factory=list)

    @property
    def total_runs(self) -> int:
        return sum(r.runs for r in self.records)

    @property
    def failure_mass(self) -> float:
        """Sum over guesses of runs made times per-run failure probability."""
        return sum(r.runs * r.delta for r in self.records)


@dataclass
class SearchResult:
    value: object            # float or BadAdvice
    trace: SearchTrace


class _SearchState:
    def __init__(self):
        self.j = 0
        self.trace = SearchTrace()
        self.result = None
        self.record: GuessRecord | None = None
        self.chunk = 1


def search_many(spec: GuessOracleSpec, eps: float, count: int) -> list[SearchResult]:
    """Run ``count`` independent searches in lockstep.

    At guess ``U / 2^j`` a search makes up to ``k_j`` estimator calls at
    confidence ``delta_j``, in chunks of growing size, and stops early once
    the running minimum falls below ``(1 - eps)`` times the guess.  Any
    :class:`BadAdvice` ends the search with :class:`BadAdvice`.  A guess
    below 1 ends it with 0.  Searches at the same guess share estimator batches.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    states = [_SearchState() for _ in range(count)]
    while True:
        active = [s for s in states if s.result is None]
        if not active:
            break
        by_j: dict[int, list[_SearchState]] = {}
        for s in active:
            guess = spec.upper / 2.0 ** s.j
            if guess < 1.0:
                s.result = 0.0
                continue
            if s.record is None:
                k, d = repetition_schedule(s.j, eps)
                s.record = GuessRecord(guess, d, k)
                s.trace.records.append(s.record)
                s.chunk = 1
            by_j.setdefault(s.j, []).append(s)
        for j, group in sorted(by_j.items()):
            rec0 = group[0].record
            sizes = [min(s.chunk, s.record.planned - s.record.runs) for s in group]
            values, bad = spec.run(rec0.guess, eps, rec0.delta, sum(sizes))
            at = 0
            for s, size in zip(group, sizes):
                v, b = values[at:at + size], bad[at:at + size]
                at += size
                rec = s.record
                rec.runs += size
                if np.any(b):
                    rec.bad_advice = True
                    s.result = BadAdvice(_REASONS[int(b[np.nonzero(b)[0][0]])])
                    continue
                rec.minimum = min(rec.minimum, float(np.min(v)))
                if rec.minimum < (1.0 - eps) * rec.guess:
                    s.j += 1
                    s.record = None
                elif rec.runs >= rec.planned:
                    rec.accepted = True
                    s.result = rec.minimum
                else:
                    s.chunk *= _CHUNK_GROWTH
    return [SearchResult(s.result, s.trace) for s in states]


def search(spec: GuessOracleSpec, eps: float) -> SearchResult:
    return search_many(spec, eps, 1)[0]


def amplification_count(delta: float) -> int:
    """Independent searches used to reach failure probability ``delta``."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return max(1, int(math.ceil(20.0 * math.log2(1.0 / delta))))


@dataclass
class TestableResult:
    value: object            # float or BadAdvice
    searches: list
    repetitions: int

    __test__ = False

    @property
    def bad_advice(self) -> bool:
        return isinstance(self.value, BadAdvice)


def _combine(results: list[SearchResult]) -> TestableResult:
    k = len(results)
    bad = sum(isinstance(r.value, BadAdvice) for r in results)
    if bad > k / 2:
        return TestableResult(BadAdvice(RejectReason.MAJORITY), results, k)
    values = [float(r.value) for r in results if not isinstance(r.value, BadAdvice)]
    return TestableResult(float(np.median(values)), results, k)


def triangle_guess_spec(oracle: OracleHandle, m: int, advice: float, eps_inner: float) -> GuessOracleSpec:
    """Single-guess triangle estimator on ``oracle`` at accuracy ``eps_inner``."""

    def batch(guess, eps, delta, count):
        b = run_triangle_batch(oracle, m, guess, eps_inner, delta, advice, count)
        return b.value, b.rejected

    return GuessOracleSpec(None, upper=float(m) ** 1.5, exponent=1.0, batch=batch)


def edge_guess_spec(oracle: OracleHandle, n: int, advice: float, eps_inner: float) -> GuessOracleSpec:
    def batch(guess, eps, delta, count):
        b = run_edge_batch(oracle, n, guess, eps_inner, delta, advice, count)
        return b.value, np.where(b.rejected, 3, 0)

    return GuessOracleSpec(None, upper=float(n) ** 2, exponent=1.0, batch=batch)


def testable_triangles(oracle: OracleHandle, m: int, eps: float, delta: float,
                       advice: float) -> TestableResult:
    """Triangle count to within ``1 +- eps``, or :class:`BadAdvice` if the advice is refuted.

    Runs ``ceil(20 log2(1/delta))`` independent searches, each over the
    single-guess estimator at accuracy ``eps/20``.  Reports :class:`BadAdvice`
    when a strict majority of searches do, otherwise the median of the rest.
    """
    spec = triangle_guess_spec(oracle, m, advice, eps / 20.0)
    return _combine(search_many(spec, eps, amplification_count(delta)))


def testable_edges(oracle: OracleHandle, n: int, eps: float, delta: float,
                   advice: float) -> TestableResult:
    """Edge count to within ``1 +- eps``, or :class:`BadAdvice`; inner accuracy ``eps/10``."""
    spec = edge_guess_spec(oracle, n, advice, eps / 10.0)
    return _combine(search_many(spec, eps, amplification_count(delta)))


@dataclass
class AdaptiveResult:
    value: float
    advice: float
    attempts: list           # (advice, TestableResult) in order tried


def _adaptive(run, steps: int, delta: float):
    delta_each = delta / (10.0 * steps)
    attempts = []
    for j in range(1, steps + 1):
        advice = float(2 ** j)
        res = run(advice, delta_each)
        attempts.append((advice, res))
        if not res.bad_advice:
            return AdaptiveResult(float(res.value), advice, attempts)
    raise AllAdviceRejected(attempts)


def adaptive_triangles(oracle: OracleHandle, m: int, eps: float, delta: float) -> AdaptiveResult:
    """Triangle count without advice: try advice ``2, 4, ..., 2^ceil(log2 m)``."""
    steps = max(1, int(math.ceil(math.log2(max(m, 2)))))
    return _adaptive(lambda a, d: testable_triangles(oracle, m, eps, d, a), steps, delta)


def adaptive_edges(oracle: OracleHandle, n: int, eps: float, delta: float) -> AdaptiveResult:
    """Edge count without advice: try advice ``2, 4, ..., 2^ceil(log2 n)``."""
    steps = max(1, int(math.ceil(math.log2(max(n, 2)))))
    return _adaptive(lambda a, d: testable_edges(oracle, n, eps, d, a), steps, delta)
