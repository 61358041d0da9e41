"""Metered query access to a graph.

Estimators never touch a :class:`Graph` directly.  They hold an
:class:`OracleHandle`, which answers the five query kinds (degree, i-th
neighbour, pair, uniform edge, uniform vertex) and charges every answer to a
:class:`QueryLedger`.

Besides the elementary queries the handle offers batched and compound forms.
A compound query such as "draw ``k`` uniform neighbours of ``a`` and test
each against ``b``" is answered by sampling its result directly from the exact
distribution, while the ledger is charged the full ``k`` neighbour and ``k``
pair queries it stands for.  This keeps simulations with very large sample
sizes tractable without changing either the output distribution or the
reported query counts.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .graph import Graph

KINDS = ("degree", "neighbor", "pair", "uniform_edge", "uniform_vertex")

# matrices of at most this many cells are materialised per chunk
_CHUNK_CELLS = 1 << 22


class QueryError(ValueError):
    """Invalid query arguments, e.g. an out-of-range vertex id."""


class UnsupportedQuery(QueryError):
    """The query kind cannot be answered on this graph (e.g. uniform edge, m = 0)."""


class BudgetExhausted(RuntimeError):
    """The query budget was used up; the offending query was not answered."""

    def __init__(self, budget: int, ledger: "QueryLedger"):
        super().__init__(f"query budget of {budget} exhausted")
        self.budget = budget
        self.ledger = ledger


@dataclass
class QueryLedger:
    degree: int = 0
    neighbor: int = 0
    pair: int = 0
    uniform_edge: int = 0
    uniform_vertex: int = 0

    @property
    def total(self) -> int:
        return self.degree + self.neighbor + self.pair + self.uniform_edge + self.uniform_vertex

    def __add__(self, other: "QueryLedger") -> "QueryLedger":
        return QueryLedger(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def __sub__(self, other: "QueryLedger") -> "QueryLedger":
        return QueryLedger(*(getattr(self, f.name) - getattr(other, f.name) for f in fields(self)))

    def copy(self) -> "QueryLedger":
        return QueryLedger(*(getattr(self, f.name) for f in fields(self)))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class EdgeMultiset(NamedTuple):
    """Distinct sampled edges per run with multiplicities, sorted by (run, u, v).

    ``edge`` is an opaque handle per edge.  Handles are dense in ``[0, m)`` and
    order exactly like the canonical pairs, so they can index per-edge tables
    and be compared in place of the pairs.
    """
    run: np.ndarray
    edge: np.ndarray
    u: np.ndarray
    v: np.ndarray
    count: np.ndarray


class EdgeTable(NamedTuple):
    """Run-by-handle matrix of sampled edge multiplicities.

    ``u, v, du, dv`` give the endpoints of each handle and their degrees; a
    run may only use the entries of handles it actually sampled.
    """
    counts: np.ndarray
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray


class RunTally:
    """Per-run query counts collected while a batch of independent runs executes."""

    def __init__(self, runs: int):
        self.runs = runs
        self.counts = {k: np.zeros(runs, dtype=np.int64) for k in KINDS}

    def ledger(self, i: int) -> QueryLedger:
        return QueryLedger(**{k: int(self.counts[k][i]) for k in KINDS})

    def totals(self) -> np.ndarray:
        return sum(self.counts[k] for k in KINDS)


def derive_seed(base: int, *path: int) -> np.random.SeedSequence:
    """Seed for a sub-stream: ``base`` is the run seed, ``path`` e.g. (replica, worker)."""
    return np.random.SeedSequence(base, spawn_key=tuple(int(p) for p in path))


class OracleHandle:
    """Query access to ``graph`` with its own random stream and query ledger.

    ``budget`` caps the total number of queries.  The query that would exceed
    it raises :class:`BudgetExhausted` and is not answered; compound queries
    that cross the cap are charged up to the cap exactly.
    """

    def __init__(self, graph: Graph, seed=None, budget: int | None = None):
        self._g = graph
        self.rng = np.random.default_rng(seed)
        self.budget = budget
        self.ledger = QueryLedger()
        self._tally: RunTally | None = None

    @property
    def n(self) -> int:
        return self._g.n

    def reseed(self, seed) -> None:
        self.rng = np.random.default_rng(seed)

    # -- metering ----------------------------------------------------------

    def _charge(self, kind: str, amount, group=None, weights=None) -> None:
        amount = int(amount)
        if amount <= 0:
            return
        if self.budget is not None:
            room = self.budget - self.ledger.total
            if amount > room:
                setattr(self.ledger, kind, getattr(self.ledger, kind) + max(room, 0))
                raise BudgetExhausted(self.budget, self.ledger.copy())
        setattr(self.ledger, kind, getattr(self.ledger, kind) + amount)
        if self._tally is not None:
            if group is None:
                raise RuntimeError("queries inside a per-run tally must carry run ids")
            add = np.bincount(np.asarray(group, dtype=np.int64), weights=weights,
                              minlength=self._tally.runs)
            self._tally.counts[kind] += np.rint(add).astype(np.int64)

    @contextmanager
    def per_run(self, runs: int):
        """Attribute queries to runs ``0..runs-1`` while the block executes."""
        prev = self._tally
        self._tally = RunTally(runs)
        try:
            yield self._tally
        finally:
            self._tally = prev

    def _check_vertices(self, vs) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.int64)
        if vs.size and (vs.min() < 0 or vs.max() >= self._g.n):
            raise QueryError(f"vertex id out of range [0, {self._g.n})")
        return vs

    # -- elementary queries ---------------------------------------------------

    def degree(self, v: int) -> int:
        self._check_vertices([v])
        self._charge("degree", 1)
        return int(self._g.degrees[v])

    def neighbor(self, v: int, i: int):
        """The ``i``-th neighbour of ``v`` (1-based), or ``None`` past ``d(v)``."""
        self._check_vertices([v])
        self._charge("neighbor", 1)
        if 1 <= i <= self._g.degrees[v]:
            return int(self._g.indices[self._g.indptr[v] + i - 1])
        return None

    def pair(self, u: int, v: int) -> bool:
        self._check_vertices([u, v])
        self._charge("pair", 1)
        return self._g.has_edge(u, v)

    def uniform_edge(self) -> tuple[int, int]:
        if self._g.m == 0:
            raise UnsupportedQuery("uniform edge query on a graph with no edges")
        self._charge("uniform_edge", 1)
        u, v = self._g.edges[self.rng.integers(self._g.m)]
        return int(u), int(v)

    def uniform_vertex(self) -> int:
        if self._g.n == 0:
            raise UnsupportedQuery("uniform vertex query on an empty graph")
        self._charge("uniform_vertex", 1)
        return int(self.rng.integers(self._g.n))

    # -- batched forms, metered per element ------------------------------------

    def degrees(self, vs, group=None) -> np.ndarray:
        vs = self._check_vertices(vs)
        self._charge("degree", vs.size, group)
        return self._g.degrees[vs]

    def neighbors(self, vs, idx, group=None) -> np.ndarray:
        """Vectorised ``neighbor``; null answers come back as -1."""
        vs = self._check_vertices(vs)
        idx = np.asarray(idx, dtype=np.int64)
        self._charge("neighbor", vs.size, group)
        ok = (idx >= 1) & (idx <= self._g.degrees[vs])
        pos = np.where(ok, self._g.indptr[vs] + idx - 1, 0)
        return np.where(ok, self._g.indices[pos] if self._g.indices.size else -1, -1)

    def pairs(self, us, vs, group=None) -> np.ndarray:
        us = self._check_vertices(us)
        vs = self._check_vertices(vs)
        self._charge("pair", us.size, group)
        return self._g.has_edges(us, vs)

    def degree_scan(self, runs) -> np.ndarray:
        """Degree of every vertex, charged ``n`` degree queries for each run listed."""
        runs = np.asarray(runs, dtype=np.int64)
        self._charge("degree", self._g.n * runs.size, runs, np.full(runs.size, self._g.n))
        return self._g.degrees

    def uniform_edge_counts(self, k: int, runs: int, first: int = 0) -> EdgeMultiset:
        """For each of ``runs`` runs, ``k`` uniform edge queries aggregated by edge.

        Runs are numbered from ``first`` in the result and in per-run tallies.
        """
        g = self._g
        if g.m == 0:
            raise UnsupportedQuery("uniform edge query on a graph with no edges")
        k = int(k)
        ids = np.arange(first, first + runs, dtype=np.int64)
        self._charge("uniform_edge", k * runs, ids, np.full(runs, k, dtype=np.float64))
        out_run, out_eid, out_cnt = [], [], []
        if k < g.m:
            step = max(1, _CHUNK_CELLS // max(k, 1))
            for start in range(0, runs, step):
                stop = min(runs, start + step)
                draws = self.rng.integers(0, g.m, size=(stop - start, k))
                keys = (np.arange(start, stop)[:, None] * g.m + draws).ravel()
                uniq, cnt = np.unique(keys, return_counts=True)
                out_run.append(uniq // g.m)
                out_eid.append(uniq % g.m)
                out_cnt.append(cnt)
        else:
            p = np.full(g.m, 1.0 / g.m)
            step = max(1, _CHUNK_CELLS // g.m)
            for start in range(0, runs, step):
                stop = min(runs, start + step)
                counts = self.rng.multinomial(k, p, size=stop - start)
                r, e = np.nonzero(counts)
                out_run.append(r + start)
                out_eid.append(e)
                out_cnt.append(counts[r, e])
        run = np.concatenate(out_run).astype(np.int64) + first
        eid = np.concatenate(out_eid).astype(np.int64)
        cnt = np.concatenate(out_cnt).astype(np.int64)
        return EdgeMultiset(run, eid, g.edges[eid, 0], g.edges[eid, 1], cnt)

    def uniform_edge_marks(self, k: int, runs: int, classify, first: int = 0) -> np.ndarray:
        """Per run, how many of ``k`` uniform edges are marked by ``classify``.

        Stands for ``k`` uniform edge queries followed by degree queries on
        both endpoints of each sampled edge.  ``classify(u, v, du, dv)`` is
        evaluated on every edge and must return a boolean array.
        """
        g = self._g
        if g.m == 0:
            raise UnsupportedQuery("uniform edge query on a graph with no edges")
        k = int(k)
        ids = np.arange(first, first + runs, dtype=np.int64)
        self._charge("uniform_edge", k * runs, ids, np.full(runs, k, dtype=np.float64))
        self._charge("degree", 2 * k * runs, ids, np.full(runs, 2.0 * k))
        u, v = g.edges[:, 0], g.edges[:, 1]
        marked = np.asarray(classify(u, v, g.degrees[u], g.degrees[v]), dtype=bool)
        return self.rng.binomial(k, marked.mean(), size=runs)

    def uniform_edge_table(self, k: int, runs: int, first: int = 0) -> EdgeTable:
        """``k`` uniform edge queries per run, followed by degree queries on both
        endpoints of every distinct sampled edge (two per distinct edge and run).
        """
        g = self._g
        if g.m == 0:
            raise UnsupportedQuery("uniform edge query on a graph with no edges")
        k = int(k)
        ids = np.arange(first, first + runs, dtype=np.int64)
        self._charge("uniform_edge", k * runs, ids, np.full(runs, k, dtype=np.float64))
        counts = self.rng.multinomial(k, np.full(g.m, 1.0 / g.m), size=runs)
        distinct = (counts > 0).sum(axis=1)
        self._charge("degree", 2 * distinct.sum(), ids, 2.0 * distinct)
        u, v = g.edges[:, 0], g.edges[:, 1]
        return EdgeTable(counts, u, v, g.degrees[u], g.degrees[v])

    def _edge_triangle_info(self, a, b):
        a = self._check_vertices(a)
        b = self._check_vertices(b)
        eid = self._g.edge_index(a, b)
        if np.any(eid < 0):
            raise QueryError("wedge queries need (a, b) to be an edge")
        return a, b, eid, self._g.edge_triangle_counts[eid], self._g.degrees[a]

    def wedge_closures(self, a, b, k, group=None) -> np.ndarray:
        """For each edge ``(a, b)``: how many of ``k`` uniform neighbours of ``a`` are adjacent to ``b``.

        Stands for ``k`` neighbour queries and ``k`` pair queries per element.
        """
        a, b, eid, t, da = self._edge_triangle_info(a, b)
        k = np.broadcast_to(np.asarray(k, dtype=np.int64), a.shape)
        w = k.astype(np.float64)
        self._charge("neighbor", k.sum(), group, w)
        self._charge("pair", k.sum(), group, w)
        return self.rng.binomial(k, t / da)

    def weighted_wedge_hits(self, run, edge, anchor, weight, draws, nruns: int, first: int = 0):
        """Weighted wedge sampling across a batch of runs.

        Rows ``j`` are sampled edges ``edge[j]`` (handles as returned by
        :meth:`uniform_edge_counts`) belonging to run ``run[j]``.  For each
        run ``g`` this stands for ``draws[g - first]`` repetitions of: pick a
        row of run ``g`` with probability proportional to ``weight``, query a
        uniform neighbour ``w`` of the row's ``anchor`` endpoint, and query
        whether ``w`` is adjacent to the other endpoint.  Each repetition is
        charged one neighbour and one pair query.

        Returns the closing draws aggregated as ``(row, w, via_anchor,
        via_other, count)``, where the ``via`` arrays are handles of the edges
        joining ``w`` to the anchor and to the other endpoint.
        """
        g = self._g
        run = np.asarray(run, dtype=np.int64)
        edge = np.asarray(edge, dtype=np.int64)
        anchor = self._check_vertices(anchor)
        weight = np.asarray(weight, dtype=np.float64)
        draws = np.asarray(draws, dtype=np.int64)
        eu, ev = g.edges[edge, 0], g.edges[edge, 1]
        if np.any((anchor != eu) & (anchor != ev)):
            raise QueryError("anchor must be an endpoint of its edge")
        local = run - first
        runs = np.arange(first, first + nruns)
        self._charge("neighbor", draws.sum(), runs, draws.astype(np.float64))
        self._charge("pair", draws.sum(), runs, draws.astype(np.float64))

        ptr, third, via_u, via_v = g.third_vertex_csr
        tcount = ptr[edge + 1] - ptr[edge]
        total = np.bincount(local, weights=weight, minlength=nruns)
        da = g.degrees[anchor]
        n_cells = int(tcount.sum())
        if n_cells == 0 or draws.sum() == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e, e, e, e
        if draws.sum() < n_cells:
            return self._wedge_hits_direct(local, edge, anchor, eu, ev, weight, total, draws)

        rows = np.repeat(np.arange(edge.size), tcount)
        start = np.repeat(ptr[edge], tcount)
        pos_in_row = np.arange(n_cells) - np.repeat(np.cumsum(tcount) - tcount, tcount)
        entry = start + pos_in_row
        cell_run = local[rows]
        per_run = np.bincount(cell_run, minlength=nruns)
        run_start = np.zeros(nruns, dtype=np.int64)
        np.cumsum(per_run[:-1], out=run_start[1:])
        col = np.arange(n_cells) - run_start[cell_run]
        width = int(per_run.max()) + 1
        prob = weight[rows] / (total[cell_run] * da[rows])
        # the final column collects draws that found no triangle
        p = np.zeros((nruns, width))
        p[cell_run, col] = prob
        counts = self.rng.multinomial(draws, p)
        hit = counts[cell_run, col]
        keep = np.nonzero(hit)[0]
        rows, entry, hit = rows[keep], entry[keep], hit[keep]
        is_u = anchor[rows] == eu[rows]
        va = np.where(is_u, via_u[entry], via_v[entry])
        vb = np.where(is_u, via_v[entry], via_u[entry])
        return rows, third[entry], va, vb, hit

    def weighted_wedge_split(self, runs, weight, anchor, draws, classify):
        """Aggregated weighted wedge sampling for runs whose sample holds every edge.

        Same experiment as :meth:`weighted_wedge_hits`, with ``weight`` a
        ``(len(runs), m)`` matrix over edge handles and ``anchor`` the anchor
        endpoint per handle.  Instead of listing closing draws, each closing
        draw is labelled by ``classify(edge, via_anchor, via_other)``, called
        once with handle arrays describing every possible closing draw and
        returning a boolean label per draw kind, either shared by all runs
        (shape ``(cells,)``) or per run (shape ``(len(runs), cells)``).

        Returns ``(marked, closing)`` per run: the number of closing draws
        with a true label and the total number of closing draws.  Aggregating
        the multinomial over labels leaves the joint distribution of these
        two counts unchanged.
        """
        g = self._g
        runs = np.asarray(runs, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.float64)
        anchor = self._check_vertices(anchor)
        draws = np.asarray(draws, dtype=np.int64)
        if weight.shape != (runs.size, g.m) or anchor.shape != (g.m,):
            raise QueryError("dense wedge sampling needs one weight column per edge")
        eu, ev = g.edges[:, 0], g.edges[:, 1]
        if np.any((anchor != eu) & (anchor != ev)):
            raise QueryError("anchor must be an endpoint of its edge")
        dw = draws.astype(np.float64)
        self._charge("neighbor", draws.sum(), runs, dw)
        self._charge("pair", draws.sum(), runs, dw)
        ptr, third, via_u, via_v = g.third_vertex_csr
        tcount = np.diff(ptr)
        cell_edge = np.repeat(np.arange(g.m), tcount)
        if cell_edge.size == 0:
            zero = np.zeros(runs.size, dtype=np.int64)
            return zero, zero
        is_u = anchor[cell_edge] == eu[cell_edge]
        va = np.where(is_u, via_u, via_v)
        vb = np.where(is_u, via_v, via_u)
        label = np.asarray(classify(cell_edge, va, vb), dtype=bool)
        da = g.degrees[anchor].astype(np.float64)
        share = weight / weight.sum(axis=1)[:, None] / da[None, :]
        p_close = share @ tcount.astype(np.float64)
        if label.ndim == 1:
            per_edge = np.bincount(cell_edge, weights=label, minlength=g.m)
            p_mark = share @ per_edge
        else:
            p_mark = (share[:, cell_edge] * label).sum(axis=1)
        p_mark = np.minimum(p_mark, p_close)
        marked = self.rng.binomial(draws, np.clip(p_mark, 0.0, 1.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(p_mark < 1.0, (p_close - p_mark) / (1.0 - p_mark), 0.0)
        rest = self.rng.binomial(draws - marked, np.clip(q, 0.0, 1.0))
        return marked, marked + rest

    def _wedge_hits_direct(self, local, edge, anchor, eu, ev, weight, total, draws):
        g = self._g
        other = np.where(anchor == eu, ev, eu)
        cum = np.cumsum(weight)
        offset = cum - weight
        nruns = draws.size
        first_row = np.full(nruns, -1, dtype=np.int64)
        first_row[local[::-1]] = np.arange(local.size)[::-1]
        lo = np.where(first_row >= 0, offset[np.maximum(first_row, 0)], 0.0)
        draw_run = np.repeat(np.arange(nruns), draws)
        x = lo[draw_run] + self.rng.random(draw_run.size) * total[draw_run]
        rows = np.minimum(np.searchsorted(cum, x, side="right"), local.size - 1)
        a = anchor[rows]
        pick = np.floor(self.rng.random(rows.size) * g.degrees[a]).astype(np.int64)
        w = g.indices[g.indptr[a] + pick]
        closes = g.has_edges(w, other[rows])
        rows, w = rows[closes], w[closes]
        key = rows * g.n + w
        uniq, cnt = np.unique(key, return_counts=True)
        rows, w = uniq // g.n, uniq % g.n
        return rows, w, g.edge_index(anchor[rows], w), g.edge_index(other[rows], w), cnt

    def vertex_neighbor_draws(self, q: int, runs):
        """``q`` draws per listed run of: uniform vertex ``u``, its degree, a uniform neighbour.

        Returns ``(run, u, d(u), v)`` with ``v = -1`` when ``d(u) = 0`` (no
        neighbour query is made then).
        """
        g = self._g
        if g.n == 0:
            raise UnsupportedQuery("uniform vertex query on an empty graph")
        runs = np.asarray(runs, dtype=np.int64)
        q = int(q)
        qw = np.full(runs.size, q, dtype=np.float64)
        self._charge("uniform_vertex", q * runs.size, runs, qw)
        run = np.repeat(runs, q)
        u = self.rng.integers(0, g.n, size=run.size)
        self._charge("degree", u.size, run)
        du = g.degrees[u]
        has = du > 0
        self._charge("neighbor", int(has.sum()), run[has])
        pick = np.floor(self.rng.random(u.size) * du).astype(np.int64)
        pos = np.where(has, g.indptr[u] + np.minimum(pick, np.maximum(du - 1, 0)), 0)
        v = np.where(has, g.indices[pos] if g.indices.size else -1, -1)
        return run, u, du, v
