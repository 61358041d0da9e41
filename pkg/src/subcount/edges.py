"""Single-guess edge counting with arboricity advice.

Each edge is charged to its endpoint that comes first in the degree order
(smaller degree, ties to smaller id).  Sampling a uniform vertex ``u`` and a
uniform neighbour ``v`` and scoring ``d(u)`` when ``u`` precedes ``v`` gives an
unbiased estimate of ``m / n``.  When the advice is right only a small
fraction of edges have both endpoints of high degree, which a uniform edge
sample checks before the main loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import vertex_precedes
from .oracle import OracleHandle, RunTally
from .triangles import BadAdvice, Estimate, RejectReason

_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class EdgeRunConfig:
    n: int
    eps: float
    delta: float
    advice: float
    guess: float
    seed: int | None = None

    def __post_init__(self):
        check_edge_parameters(self.n, self.eps, self.delta, self.advice, self.guess)


def check_edge_parameters(n, eps, delta, advice, guess) -> None:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if advice <= 0:
        raise ValueError(f"advice must be positive, got {advice}")
    if guess <= 0:
        raise ValueError(f"guess must be positive, got {guess}")


def edge_parameters(n, eps, delta, advice, guess):
    """``(eps', delta', degree cap, gate sample size, main-loop size)`` for one run."""
    eps_i = eps / 6.0
    delta_i = delta / 2.0
    cap = 2.0 * advice / eps_i
    r = int(math.ceil(12.0 * math.log(1.0 / delta_i) / eps_i ** 2))
    q = int(math.ceil(n * advice / guess * 12.0 * math.log(2.0 / delta_i) / eps_i ** 3))
    return eps_i, delta_i, cap, r, q


def oriented_out_degree(oracle: OracleHandle, v: int) -> int:
    """Number of neighbours ``w`` of ``v`` with ``v`` before ``w`` in the degree order.

    Costs one degree query on ``v`` plus a neighbour and a degree query per
    neighbour.
    """
    d = oracle.degree(v)
    out = 0
    for i in range(1, d + 1):
        w = oracle.neighbor(v, i)
        dw = oracle.degree(w)
        if vertex_precedes(d, v, dw, w):
            out += 1
    return out


@dataclass
class EdgeBatch:
    r: int
    q: int
    exact_branch: bool
    value: np.ndarray        # estimate, NaN for rejected runs
    shadow: np.ndarray       # estimate ignoring the gate when requested, else NaN
    rejected: np.ndarray     # bool
    heavy_fraction: np.ndarray
    tally: RunTally | None = None

    def __len__(self) -> int:
        return int(self.value.size)

    def outcome(self, i: int):
        ledger = self.tally.ledger(i) if self.tally is not None else None
        if self.rejected[i]:
            return BadAdvice(RejectReason.HEAVY_EDGES, None, ledger)
        return Estimate(float(self.value[i]), None, ledger)

    def outcomes(self) -> list:
        return [self.outcome(i) for i in range(len(self))]


def _edge_chunk(oracle, first, nruns, n, eps_i, cap, r, q, shadow, out):
    high = oracle.uniform_edge_marks(r, nruns, lambda u, v, du, dv: np.minimum(du, dv) > cap, first)
    frac = high / r
    rejected = frac > 2.0 * eps_i
    go = ~rejected | shadow
    ids = np.nonzero(go)[0]
    est = np.full(nruns, np.nan)
    if ids.size:
        if q >= n:
            degrees = oracle.degree_scan(ids + first)
            est[ids] = degrees.sum() / 2.0
        else:
            total = np.zeros(nruns)
            step = max(1, _CHUNK_CELLS // q)
            for s0 in range(0, ids.size, step):
                part = ids[s0:s0 + step] + first
                dr, du_, ddu, dv_ = oracle.vertex_neighbor_draws(q, part)
                need = (ddu > 0) & (ddu <= cap)
                score = np.zeros(ddu.size)
                ddv = oracle.degrees(dv_[need], dr[need])
                wins = vertex_precedes(ddu[need], du_[need], ddv, dv_[need])
                score[np.nonzero(need)[0][wins]] = ddu[need][wins]
                total += np.bincount(dr - first, weights=score, minlength=nruns)
            est[ids] = n / q * total[ids]
    sl = slice(first, first + nruns)
    out["value"][sl] = np.where(rejected, np.nan, est)
    out["shadow"][sl] = est if shadow else np.nan
    out["rejected"][sl] = rejected
    out["heavy_fraction"][sl] = frac


def run_edge_batch(oracle: OracleHandle, n: int, guess: float, eps: float, delta: float,
                   advice: float, runs: int, *, shadow: bool = False,
                   per_run_ledgers: bool = False) -> EdgeBatch:
    """Execute ``runs`` independent single-guess edge estimator runs.

    ``eps`` and ``delta`` are the caller's targets; the run works internally
    with ``eps/6`` and ``delta/2``.  When the main-loop sample would reach
    ``n`` the run reads every degree instead and returns half their sum.
    """
    check_edge_parameters(n, eps, delta, advice, guess)
    eps_i, delta_i, cap, r, q = edge_parameters(n, eps, delta, advice, guess)
    out = {
        "value": np.full(runs, np.nan),
        "shadow": np.full(runs, np.nan),
        "rejected": np.zeros(runs, dtype=bool),
        "heavy_fraction": np.zeros(runs),
    }
    step = max(1, _CHUNK_CELLS // max(1, min(q, n)))

    def go():
        for first in range(0, runs, step):
            _edge_chunk(oracle, first, min(step, runs - first), n, eps_i, cap, r, q, shadow, out)

    tally = None
    if per_run_ledgers:
        with oracle.per_run(runs) as tally:
            go()
    else:
        go()
    return EdgeBatch(r=r, q=q, exact_branch=q >= n, tally=tally, **out)


def approx_edges_with_advice(oracle: OracleHandle, cfg: EdgeRunConfig):
    """One edge estimator run: an :class:`Estimate` or :class:`BadAdvice`."""
    if cfg.seed is not None:
        oracle.reseed(cfg.seed)
    before = oracle.ledger.copy()
    batch = run_edge_batch(oracle, cfg.n, cfg.guess, cfg.eps, cfg.delta, cfg.advice, 1)
    ledger = oracle.ledger - before
    if batch.rejected[0]:
        return BadAdvice(RejectReason.HEAVY_EDGES, None, ledger)
    return Estimate(float(batch.value[0]), None, ledger)
