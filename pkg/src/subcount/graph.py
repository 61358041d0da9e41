"""Immutable simple undirected graphs and exact reference counts."""
from __future__ import annotations

import itertools
from functools import cached_property

import numpy as np


class GraphInvariantError(ValueError):
    """Raised when an edge set violates simplicity (self-loop, duplicate, bad id)."""


class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    Edges are stored once as canonical pairs ``(u, v)`` with ``u < v``, sorted
    lexicographically, so the row index of an edge in ``edges`` is its rank in
    the lexicographic edge order.  Adjacency is kept in CSR form with each
    neighbour list sorted ascending.
    """

    def __init__(self, n: int, edges=()):
        n = int(n)
        if n < 0:
            raise GraphInvariantError(f"vertex count must be non-negative, got {n}")
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if arr.min() < 0 or arr.max() >= n:
                raise GraphInvariantError(f"edge endpoint out of range [0, {n})")
            if np.any(arr[:, 0] == arr[:, 1]):
                raise GraphInvariantError("self-loop in edge list")
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        keys = lo * n + hi
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise GraphInvariantError("duplicate edge in edge list")
        self.n = n
        self.edges = np.stack([lo[order], hi[order]], axis=1)
        self.edges.setflags(write=False)
        self._keys = keys
        self._keys.setflags(write=False)

        both = np.concatenate([self.edges, self.edges[:, ::-1]])
        both = both[np.lexsort((both[:, 1], both[:, 0]))]
        self.degrees = np.bincount(both[:, 0], minlength=n).astype(np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(self.degrees, out=self.indptr[1:])
        self.indices = both[:, 1].copy()
        for a in (self.degrees, self.indptr, self.indices):
            a.setflags(write=False)

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "Graph":
        """Build a graph from arbitrary pairs, dropping repeats and orientation."""
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            lo = np.minimum(arr[:, 0], arr[:, 1])
            hi = np.maximum(arr[:, 0], arr[:, 1])
            arr = np.unique(np.stack([lo, hi], axis=1), axis=0)
        return cls(n, arr)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None

    def degree(self, v: int) -> int:
        return int(self.degrees[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        # binary search in the shorter of the two sorted neighbour lists
        if u == v:
            return False
        if self.degrees[u] > self.degrees[v]:
            u, v = v, u
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < nb.size and nb[i] == v)

    def edge_keys(self, us, vs) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        return np.minimum(us, vs) * self.n + np.maximum(us, vs)

    def edge_index(self, us, vs) -> np.ndarray:
        """Row index in ``edges`` for each pair, or -1 for non-edges."""
        keys = self.edge_keys(us, vs)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, max(self.m - 1, 0))
        hit = (self.m > 0) & (self._keys[pos] == keys) if self.m else np.zeros(keys.shape, bool)
        return np.where(hit, pos, -1)

    def has_edges(self, us, vs) -> np.ndarray:
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        return (self.edge_index(us, vs) >= 0) & (us != vs)

    def edge_degrees(self) -> np.ndarray:
        """``d(e) = min(d(u), d(v))`` for every edge, aligned with ``edges``."""
        return np.minimum(self.degrees[self.edges[:, 0]], self.degrees[self.edges[:, 1]])

    # -- triangle structure, computed once and shared by every oracle handle --

    @cached_property
    def triangles(self) -> np.ndarray:
        """All triangles as rows ``(a, b, c)`` with ``a < b < c``."""
        rank = degree_order_rank(self)
        out = [set() for _ in range(self.n)]
        for u, v in self.edges.tolist():
            if rank[u] < rank[v]:
                out[u].add(v)
            else:
                out[v].add(u)
        found = []
        for a in range(self.n):
            sa = out[a]
            if len(sa) < 2:
                continue
            for b in sa:
                for c in sa & out[b]:
                    found.append((a, b, c))
        tri = np.array(found, dtype=np.int64).reshape(-1, 3)
        tri.sort(axis=1)
        if tri.shape[0]:
            tri = tri[np.lexsort((tri[:, 2], tri[:, 1], tri[:, 0]))]
        tri.setflags(write=False)
        return tri

    @cached_property
    def _edge_third(self):
        tri = self.triangles
        if tri.shape[0] == 0:
            ptr = np.zeros(self.m + 1, dtype=np.int64)
            empty = np.zeros(0, dtype=np.int64)
            return ptr, empty, empty, empty
        a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
        ab, ac, bc = self.edge_index(a, b), self.edge_index(a, c), self.edge_index(b, c)
        eids = np.concatenate([ab, ac, bc])
        third = np.concatenate([c, b, a])
        # for edge (u, v) with third vertex w: index of (u, w) and of (v, w)
        via_u = np.concatenate([ac, ab, ab])
        via_v = np.concatenate([bc, bc, ac])
        order = np.lexsort((third, eids))
        counts = np.bincount(eids, minlength=self.m)
        ptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return ptr, third[order], via_u[order], via_v[order]

    @property
    def edge_triangle_counts(self) -> np.ndarray:
        """``t(e)`` for every edge, aligned with ``edges``."""
        return np.diff(self._edge_third[0])

    def third_vertices(self, eid: int) -> np.ndarray:
        ptr, third = self._edge_third[:2]
        return third[ptr[eid]:ptr[eid + 1]]

    @property
    def third_vertex_csr(self):
        """``(ptr, third, via_u, via_v)`` over edge indices.

        Entries ``ptr[e]:ptr[e+1]`` list the common neighbours ``w`` of edge
        ``e = (u, v)`` in increasing order, with the indices of edges
        ``(u, w)`` and ``(v, w)``.
        """
        return self._edge_third


def degree_order_rank(g: Graph) -> np.ndarray:
    """Position of each vertex in the order (degree, id) ascending."""
    order = np.lexsort((np.arange(g.n), g.degrees))
    rank = np.empty(g.n, dtype=np.int64)
    rank[order] = np.arange(g.n)
    return rank


def vertex_precedes(du, u, dv, v):
    """``u`` comes before ``v`` when it has smaller degree, ties broken by id."""
    return (du < dv) | ((du == dv) & (u < v))


def edge_degree(g: Graph, u: int, v: int) -> int:
    if not g.has_edge(u, v):
        raise GraphInvariantError(f"({u}, {v}) is not an edge")
    return int(min(g.degrees[u], g.degrees[v]))


def exact_triangle_count(g: Graph, per_edge: bool = False):
    """Count triangles by degree-ordered enumeration.

    With ``per_edge=True`` also returns ``t(e)`` for each edge, aligned with
    ``g.edges``; those values always sum to three times the total.
    """
    t = int(g.triangles.shape[0])
    if per_edge:
        return t, g.edge_triangle_counts.copy()
    return t


def brute_force_triangle_count(g: Graph) -> int:
    """Reference count over all vertex triples.  Cubic, for small graphs only."""
    adj = np.zeros((g.n, g.n), dtype=bool)
    adj[g.edges[:, 0], g.edges[:, 1]] = True
    adj[g.edges[:, 1], g.edges[:, 0]] = True
    count = 0
    for a, b, c in itertools.combinations(range(g.n), 3):
        if adj[a, b] and adj[a, c] and adj[b, c]:
            count += 1
    return count


def degeneracy(g: Graph) -> int:
    """Largest k such that the graph has a non-empty k-core.

    Bucket peeling in linear time.  Arboricity satisfies
    ``alpha <= degeneracy <= 2 * alpha - 1`` so this doubles as a proxy for it.
    """
    n = g.n
    if n == 0 or g.m == 0:
        return 0
    deg = g.degrees.tolist()
    maxd = max(deg)
    buckets = [[] for _ in range(maxd + 1)]
    for v, d in enumerate(deg):
        buckets[d].append(v)
    removed = [False] * n
    indptr = g.indptr.tolist()
    indices = g.indices.tolist()
    best = 0
    d = 0
    done = 0
    while done < n:
        while not buckets[d]:
            d += 1
        v = buckets[d].pop()
        if removed[v] or deg[v] != d:
            continue
        removed[v] = True
        done += 1
        best = max(best, d)
        for w in indices[indptr[v]:indptr[v + 1]]:
            if not removed[w] and deg[w] > 0:
                deg[w] -= 1
                buckets[deg[w]].append(w)
                if deg[w] < d:
                    d = deg[w]
    return best
