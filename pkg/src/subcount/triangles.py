"""Single-guess triangle estimation with arboricity advice.

Given the edge count ``m``, a triangle-count guess and an arboricity advice
value, :func:`approx_triangles_with_advice` either estimates the triangle
count or reports that the advice looks wrong (:class:`BadAdvice`).

The work is done by :func:`run_triangle_batch`, which executes many
independent runs at the same parameters in one vectorised pass.  The scalar
entry points are batches of one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .oracle import OracleHandle, QueryLedger, RunTally

EPS_CAP = 1.0 / 20.0

# rows materialised per chunk of runs
_CHUNK_ROWS = 1 << 20


class RejectReason(str, Enum):
    DEGREE_SUM = "degree-sum"
    HEAVY_FRACTION = "heavy-fraction"
    HEAVY_EDGES = "heavy-edges"
    MAJORITY = "majority"


@dataclass(frozen=True)
class BadAdvice:
    """The estimator's evidence is inconsistent with the advice it was given."""
    reason: RejectReason
    stats: "TrialStats | None" = field(default=None, compare=False)
    ledger: QueryLedger | None = field(default=None, compare=False)


@dataclass(frozen=True)
class TrialStats:
    r: int
    s: int
    degree_sum: int
    heavy_fraction: float
    assigned_hits: int
    triangle_hits: int
    # the estimate the run would have produced without the rejection gates
    shadow: float | None = None


@dataclass(frozen=True)
class Estimate:
    value: float
    stats: TrialStats | None = field(default=None, compare=False)
    ledger: QueryLedger | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Thresholds:
    gamma: float
    tau_degree: float
    tau_triangles: float


@dataclass(frozen=True)
class TriangleRunConfig:
    m: int
    eps: float
    delta: float
    advice: float
    guess: float
    seed: int | None = None

    def __post_init__(self):
        check_parameters(self.m, self.eps, self.delta, self.advice, self.guess)


def check_parameters(m, eps, delta, advice, guess) -> None:
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if advice <= 0:
        raise ValueError(f"advice must be positive, got {advice}")
    if guess <= 0:
        raise ValueError(f"guess must be positive, got {guess}")


def compute_thresholds(m: int, eps: float, advice: float, guess: float) -> Thresholds:
    """Heaviness cut-offs for a run with edge count ``m`` and the given guess."""
    if m < 1 or advice <= 0 or guess <= 0 or not 0 < eps < 1:
        raise ValueError("need m >= 1, advice > 0, guess > 0 and 0 < eps < 1")
    gamma = max(float(advice), float(np.cbrt(guess)))
    tau_degree = 8.0 * m * gamma * gamma / (eps * guess)
    tau_triangles = 12.0 * gamma / eps
    return Thresholds(gamma, tau_degree, tau_triangles)


def edge_sample_size(m, eps, delta, guess, tau_triangles) -> int:
    log_term = math.log(4.0 / delta)
    a = 16.0 * m * tau_triangles * log_term / (eps * eps * guess)
    b = 30.0 * m * log_term / (eps * guess) ** (2.0 / 3.0)
    return int(math.ceil(max(a, b)))


def wedge_sample_size(degree_sum, r, m, eps, delta, guess) -> np.ndarray:
    ds = np.asarray(degree_sum, dtype=np.float64)
    return np.ceil(ds / (r * guess / m) * 10.0 * math.log(8.0 / delta) / (eps * eps)).astype(np.int64)


def heaviness_sample_size(edge_deg, tau_triangles, m, delta) -> np.ndarray:
    ed = np.asarray(edge_deg, dtype=np.float64)
    return np.ceil(18.0 * ed / tau_triangles * math.log(10.0 * m / delta)).astype(np.int64)


class HeavinessCache:
    """Memoised heaviness verdicts keyed by integer edge keys.

    A verdict, once stored, never changes; the number of neighbour-sample
    queries spent on it is kept alongside.  Keys are whatever the caller uses
    to name an edge, typically ``u * n + v`` for a canonical pair.
    """

    def __init__(self):
        self._keys = np.zeros(0, dtype=np.int64)
        self._heavy = np.zeros(0, dtype=bool)
        self._queries = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return int(self._keys.size)

    def lookup(self, keys) -> np.ndarray:
        """Verdict per key: 1 heavy, 0 not heavy, -1 unknown."""
        keys = np.asarray(keys, dtype=np.int64)
        out = np.full(keys.shape, -1, dtype=np.int8)
        if self._keys.size == 0 or keys.size == 0:
            return out
        pos = np.minimum(np.searchsorted(self._keys, keys), self._keys.size - 1)
        hit = self._keys[pos] == keys
        out[hit] = self._heavy[pos[hit]]
        return out

    def queries(self, key: int) -> int:
        pos = np.searchsorted(self._keys, key)
        if pos < self._keys.size and self._keys[pos] == key:
            return int(self._queries[pos])
        raise KeyError(key)

    def store(self, keys, heavy, queries) -> None:
        keys = np.asarray(keys, dtype=np.int64)
        if keys.size == 0:
            return
        if np.any(self.lookup(keys) >= 0) or np.unique(keys).size != keys.size:
            raise ValueError("heaviness verdicts are write-once")
        allk = np.concatenate([self._keys, keys])
        order = np.argsort(allk, kind="stable")
        self._keys = allk[order]
        self._heavy = np.concatenate([self._heavy, np.asarray(heavy, dtype=bool)])[order]
        self._queries = np.concatenate([self._queries, np.asarray(queries, dtype=np.int64)])[order]


def _anchor(u, v, du, dv):
    """Lower-degree endpoint first, ties to the smaller id (``u < v`` assumed)."""
    first = du <= dv
    return np.where(first, u, v), np.where(first, v, u)


def _verdicts(oracle, run, u, v, du, dv, th: Thresholds, delta, m):
    """Heaviness for canonical edges whose endpoint degrees are already known."""
    ed = np.minimum(du, dv)
    heavy = ed > th.tau_degree
    k = heaviness_sample_size(ed, th.tau_triangles, m, delta)
    # past this cut-off the sampled count could never reach the heavy threshold
    sample = ~heavy & (ed > 1.5 * th.tau_triangles)
    queries = np.zeros(ed.shape, dtype=np.int64)
    if np.any(sample):
        a, b = _anchor(u[sample], v[sample], du[sample], dv[sample])
        ks = k[sample]
        grp = None if run is None else run[sample]
        hits = oracle.wedge_closures(a, b, ks, grp)
        heavy[sample] = hits > 1.5 * ks * th.tau_triangles / ed[sample]
        queries[sample] = 2 * ks
    return heavy, queries


def is_heavy(oracle: OracleHandle, edge, th: Thresholds, delta: float, m: int,
             cache: HeavinessCache) -> bool:
    """Heaviness verdict for ``edge``, memoised in ``cache``.

    A cached verdict costs no queries.  Otherwise the endpoint degrees are
    queried and, when the edge degree is large enough for the outcome to be in
    doubt, ``k`` neighbours of the lower-degree endpoint are sampled and tested
    for closing a triangle with the other endpoint.
    """
    u, v = sorted((int(edge[0]), int(edge[1])))
    key = u * oracle.n + v
    known = cache.lookup([key])[0]
    if known >= 0:
        return bool(known)
    du, dv = oracle.degrees([u, v])
    heavy, queries = _verdicts(oracle, None, np.array([u]), np.array([v]),
                               np.array([du]), np.array([dv]), th, delta, m)
    cache.store([key], heavy, queries)
    return bool(heavy[0])


def classify_edges(oracle: OracleHandle, edges, th: Thresholds, delta: float, m: int,
                   cache: HeavinessCache) -> np.ndarray:
    """Vectorised :func:`is_heavy` over an ``(k, 2)`` array of distinct edges."""
    edges = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
    keys = edges[:, 0] * oracle.n + edges[:, 1]
    known = cache.lookup(keys)
    miss = np.nonzero(known < 0)[0]
    if miss.size:
        u, v = edges[miss, 0], edges[miss, 1]
        du, dv = oracle.degrees(u), oracle.degrees(v)
        heavy, queries = _verdicts(oracle, None, u, v, du, dv, th, delta, m)
        cache.store(keys[miss], heavy, queries)
        known[miss] = heavy
    return known.astype(bool)


def is_assigned(oracle: OracleHandle, edge, w: int, th: Thresholds, delta: float, m: int,
                cache: HeavinessCache) -> bool:
    """Whether triangle ``(edge, w)`` is charged to ``edge``.

    True when ``edge`` is not heavy and no other non-heavy edge of the triangle
    precedes it lexicographically.
    """
    u, v = sorted((int(edge[0]), int(edge[1])))
    sides = [(u, v), tuple(sorted((u, int(w)))), tuple(sorted((v, int(w))))]
    light = [e for e in sides if not is_heavy(oracle, e, th, delta, m, cache)]
    return (u, v) in light and min(light) == (u, v)


@dataclass
class TriangleBatch:
    """Per-run results of :func:`run_triangle_batch`."""
    guess: float
    eps: float
    r: int
    value: np.ndarray            # estimate, NaN for rejected runs unless shadowed
    shadow: np.ndarray           # gate-free estimate when computed, else NaN
    rejected: np.ndarray         # 0 accepted, 1 degree-sum gate, 2 heavy-fraction gate
    s: np.ndarray
    degree_sum: np.ndarray
    heavy_fraction: np.ndarray
    assigned_hits: np.ndarray
    triangle_hits: np.ndarray
    tally: RunTally | None = None

    def __len__(self) -> int:
        return int(self.value.size)

    def outcome(self, i: int):
        stats = TrialStats(self.r, int(self.s[i]), int(self.degree_sum[i]),
                           float(self.heavy_fraction[i]), int(self.assigned_hits[i]),
                           int(self.triangle_hits[i]),
                           None if np.isnan(self.shadow[i]) else float(self.shadow[i]))
        ledger = self.tally.ledger(i) if self.tally is not None else None
        code = int(self.rejected[i])
        if code == 1:
            return BadAdvice(RejectReason.DEGREE_SUM, stats, ledger)
        if code == 2:
            return BadAdvice(RejectReason.HEAVY_FRACTION, stats, ledger)
        return Estimate(float(self.value[i]), stats, ledger)

    def outcomes(self) -> list:
        return [self.outcome(i) for i in range(len(self))]


def _assigned_mask(table, cell, via_a, via_b):
    """Whether each closing draw is charged to its sampled edge, given verdicts.

    ``table`` holds per-run verdicts over edge handles; handles compare like
    the lexicographic edge order.
    """
    if not np.any(table == 1):
        return (cell < via_a) & (cell < via_b)
    light = table == 0
    la, lb = light[:, via_a], light[:, via_b]
    return light[:, cell] & ~(la & (via_a < cell)) & ~(lb & (via_b < cell))


def _sparse_wedges(oracle, first, nruns, m, th, delta, verdict, run, edge, u, v, anchor,
                   weight, draws):
    """Wedge sampling with per-draw bookkeeping, for runs whose sample misses edges."""
    rows, w, via_a, via_b, c = oracle.weighted_wedge_hits(
        run, edge, anchor, weight, draws, nruns, first)
    hl = run[rows] - first
    # heaviness of the two other triangle edges, evaluated on first sight
    side = np.concatenate([via_a, via_b])
    side_run = np.concatenate([hl, hl])
    unseen = verdict[side_run, side] < 0
    if np.any(unseen):
        sel = np.nonzero(unseen)[0]
        key, pick = np.unique(side_run[sel] * m + side[sel], return_index=True)
        kr, ke = key // m, key % m
        # endpoints of each unseen edge, read off one triangle that exposed it
        near = np.concatenate([anchor[rows], np.where(anchor == u, v, u)[rows]])
        x, y = np.concatenate([w, w])[sel[pick]], near[sel[pick]]
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        dl = oracle.degrees(lo, kr + first)
        dh = oracle.degrees(hi, kr + first)
        nh, _ = _verdicts(oracle, kr + first, lo, hi, dl, dh, th, delta, m)
        verdict[kr, ke] = nh
    own = edge[rows]
    light0 = verdict[hl, own] == 0
    light_a = verdict[hl, via_a] == 0
    light_b = verdict[hl, via_b] == 0
    assigned = light0 & ~(light_a & (via_a < own)) & ~(light_b & (via_b < own))
    return (np.bincount(hl, weights=c * assigned, minlength=nruns),
            np.bincount(hl, weights=c, minlength=nruns))


def _batch_chunk(oracle, first, nruns, m, guess, eps, delta, advice, th, r, shadow, dense, out):
    ids = np.arange(first, first + nruns)
    # verdict table for this chunk: -1 unknown, 0 light, 1 heavy
    verdict = np.full((nruns, m), -1, dtype=np.int8)
    if dense:
        tab = oracle.uniform_edge_table(r, nruns, first)
        counts = tab.counts
        ed = np.minimum(tab.du, tab.dv)
        degree_sum = counts @ ed
        seen = counts > 0
    else:
        run, edge, u, v, cnt = oracle.uniform_edge_counts(r, nruns, first=first)
        local = run - first
        du = oracle.degrees(u, run)
        dv = oracle.degrees(v, run)
        ed_rows = np.minimum(du, dv)
        degree_sum = np.bincount(local, weights=cnt * ed_rows, minlength=nruns).astype(np.int64)
    rejected = np.zeros(nruns, dtype=np.int8)
    rejected[degree_sum > r * advice * 4.0 / delta] = 1
    live = (rejected == 0) | shadow

    if dense:
        # verdicts not decided by the edge degree alone are sampled per run
        forced = np.where(ed > th.tau_degree, 1, 0).astype(np.int8)
        doubt = (ed <= th.tau_degree) & (ed > 1.5 * th.tau_triangles)
        verdict[:] = np.where(seen & live[:, None], forced[None, :], -1)
        lr, le = np.nonzero(seen & live[:, None] & doubt[None, :])
        if lr.size:
            hv, _ = _verdicts(oracle, lr + first, tab.u[le], tab.v[le], tab.du[le], tab.dv[le],
                              th, delta, m)
            verdict[lr, le] = hv
        heavy_count = (counts * (verdict == 1)).sum(axis=1)
    else:
        on = live[local]
        hv, _ = _verdicts(oracle, run[on], u[on], v[on], du[on], dv[on], th, delta, m)
        verdict[local[on], edge[on]] = hv
        heavy_count = np.bincount(local, weights=cnt * (verdict[local, edge] == 1), minlength=nruns)
    heavy_fraction = heavy_count / r
    cut = 2.5 * (eps * guess) ** (2.0 / 3.0) / m
    rejected[(rejected == 0) & (heavy_fraction > cut)] = 2
    go = (rejected == 0) | shadow

    s = np.where(go, wedge_sample_size(degree_sum, r, m, eps, delta, guess), 0)
    assigned_hits = np.zeros(nruns)
    triangle_hits = np.zeros(nruns)
    if dense:
        anchor = np.where(tab.du <= tab.dv, tab.u, tab.v)
        weight = counts * ed
        full = go & seen.all(axis=1)
        if np.any(full):
            fi = np.nonzero(full)[0]
            table = verdict[fi]
            marked, closing = oracle.weighted_wedge_split(
                ids[fi], weight[fi], anchor, s[fi],
                lambda cell, va, vb: _assigned_mask(table, cell, va, vb))
            assigned_hits[fi] = marked
            triangle_hits[fi] = closing
        part = go & ~full
        if np.any(part):
            lr, le = np.nonzero(seen & part[:, None])
            ah, th_ = _sparse_wedges(oracle, first, nruns, m, th, delta, verdict, lr + first, le,
                                     tab.u[le], tab.v[le], anchor[le],
                                     weight[lr, le].astype(np.float64), np.where(part, s, 0))
            assigned_hits += ah
            triangle_hits += th_
    elif np.any(go):
        anchor = np.where(du <= dv, u, v)
        keep = np.nonzero(go[local])[0]
        ah, th_ = _sparse_wedges(oracle, first, nruns, m, th, delta, verdict, run[keep],
                                 edge[keep], u[keep], v[keep], anchor[keep],
                                 (cnt * ed_rows)[keep].astype(np.float64), np.where(go, s, 0))
        assigned_hits += ah
        triangle_hits += th_

    with np.errstate(invalid="ignore", divide="ignore"):
        est = degree_sum * m / r * assigned_hits / s
    est = np.where(go, est, np.nan)
    sl = slice(first, first + nruns)
    out["shadow"][sl] = est if shadow else np.nan
    out["value"][sl] = np.where(rejected == 0, est, np.nan)
    out["rejected"][sl] = rejected
    out["s"][sl] = s
    out["degree_sum"][sl] = degree_sum
    out["heavy_fraction"][sl] = heavy_fraction
    out["assigned_hits"][sl] = assigned_hits
    out["triangle_hits"][sl] = triangle_hits


def run_triangle_batch(oracle: OracleHandle, m: int, guess: float, eps: float, delta: float,
                       advice: float, runs: int, *, shadow: bool = False,
                       per_run_ledgers: bool = False, layout: str = "auto") -> TriangleBatch:
    """Execute ``runs`` independent single-guess estimator runs.

    ``eps`` is capped at 1/20.  With ``shadow=True`` runs rejected by a gate
    still complete their sampling loop so the gate-free estimate is available;
    those extra queries are metered like any other.

    ``layout`` picks the bookkeeping: ``"dense"`` keeps a run-by-edge count
    matrix, ``"sparse"`` lists distinct sampled edges per run, ``"auto"``
    uses dense whenever the edge sample is at least as large as ``m``.  The
    output distribution is the same either way.
    """
    check_parameters(m, eps, delta, advice, guess)
    eps = min(eps, EPS_CAP)
    th = compute_thresholds(m, eps, advice, guess)
    r = edge_sample_size(m, eps, delta, guess, th.tau_triangles)
    out = {
        "value": np.full(runs, np.nan),
        "shadow": np.full(runs, np.nan),
        "rejected": np.zeros(runs, dtype=np.int8),
        "s": np.zeros(runs, dtype=np.int64),
        "degree_sum": np.zeros(runs, dtype=np.int64),
        "heavy_fraction": np.zeros(runs),
        "assigned_hits": np.zeros(runs, dtype=np.int64),
        "triangle_hits": np.zeros(runs, dtype=np.int64),
    }
    if layout not in ("auto", "dense", "sparse"):
        raise ValueError(f"unknown layout {layout!r}")
    dense = layout == "dense" or (layout == "auto" and r >= m)
    step = max(1, _CHUNK_ROWS // m)

    def go():
        for first in range(0, runs, step):
            _batch_chunk(oracle, first, min(step, runs - first), m, guess, eps, delta,
                         advice, th, r, shadow, dense, out)

    tally = None
    if per_run_ledgers:
        with oracle.per_run(runs) as tally:
            go()
    else:
        go()
    return TriangleBatch(guess=guess, eps=eps, r=r, tally=tally, **out)


def approx_triangles_with_advice(oracle: OracleHandle, cfg: TriangleRunConfig):
    """One estimator run: an :class:`Estimate` or :class:`BadAdvice`.

    If ``cfg.seed`` is set the handle's random stream is reseeded first.
    """
    if cfg.seed is not None:
        oracle.reseed(cfg.seed)
    before = oracle.ledger.copy()
    batch = run_triangle_batch(oracle, cfg.m, cfg.guess, cfg.eps, cfg.delta, cfg.advice, 1)
    result = batch.outcome(0)
    ledger = oracle.ledger - before
    if isinstance(result, Estimate):
        return Estimate(result.value, result.stats, ledger)
    return BadAdvice(result.reason, result.stats, ledger)
