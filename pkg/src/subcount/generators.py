"""Seeded graph generators used by the tests, the CLI and the experiments."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from math import comb

import numpy as np

from .graph import Graph, exact_triangle_count


class LowerBoundParameterError(ValueError):
    """Parameters for which the lower-bound construction does not exist."""


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def clique(k: int) -> Graph:
    iu, ju = np.triu_indices(k, 1)
    return Graph(k, np.stack([iu, ju], axis=1))


def star(n: int) -> Graph:
    """Vertex 0 joined to every other vertex."""
    leaves = np.arange(1, n, dtype=np.int64)
    return Graph(n, np.stack([np.zeros_like(leaves), leaves], axis=1))


def path(n: int) -> Graph:
    a = np.arange(max(n - 1, 0), dtype=np.int64)
    return Graph(n, np.stack([a, a + 1], axis=1))


def erdos_renyi(n: int, p: float, seed=None) -> Graph:
    """G(n, p) by thresholding one uniform draw per vertex pair."""
    rng = _rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return Graph(n, np.stack([iu[keep], ju[keep]], axis=1))


def _prufer_tree(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    if n == 2:
        return np.array([[0, 1]], dtype=np.int64)
    seq = rng.integers(0, n, size=n - 2).tolist()
    remaining = [1] * n
    for x in seq:
        remaining[x] += 1
    leaves = [v for v in range(n) if remaining[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, x))
        remaining[x] -= 1
        if remaining[x] == 1:
            heapq.heappush(leaves, x)
    a = heapq.heappop(leaves)
    b = heapq.heappop(leaves)
    edges.append((a, b))
    return np.array(edges, dtype=np.int64)


def forest_union(n: int, alpha: int, seed=None) -> Graph:
    """Union of ``alpha`` independent uniform spanning trees on ``n`` vertices.

    Arboricity is at most ``alpha`` by construction.
    """
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    rng = _rng(seed)
    parts = [_prufer_tree(n, rng) for _ in range(alpha)]
    return Graph.from_pairs(n, np.concatenate(parts) if parts else [])


def disjoint_union(*graphs: Graph) -> Graph:
    offset = 0
    parts = []
    for g in graphs:
        parts.append(g.edges + offset)
        offset += g.n
    return Graph(offset, np.concatenate(parts) if parts else [])


def relabel(g: Graph, perm) -> Graph:
    perm = np.asarray(perm, dtype=np.int64)
    return Graph.from_pairs(g.n, perm[g.edges])


def planted_clique(base: Graph, k: int, seed=None, fresh: bool = False):
    """Add a ``k``-clique to ``base``; returns ``(graph, exact_triangles)``.

    With ``fresh=True`` the clique lives on ``k`` new vertices, otherwise it is
    spread over ``k`` distinct existing vertices chosen at random.
    """
    rng = _rng(seed)
    if fresh:
        g = disjoint_union(base, clique(k))
    else:
        if k > base.n:
            raise ValueError(f"cannot plant a {k}-clique in {base.n} vertices")
        members = np.sort(rng.choice(base.n, size=k, replace=False))
        iu, ju = np.triu_indices(k, 1)
        extra = np.stack([members[iu], members[ju]], axis=1)
        g = Graph.from_pairs(base.n, np.concatenate([base.edges, extra]))
    return g, exact_triangle_count(g)


def regular_bipartite(n: int, d: int) -> Graph:
    """``d``-regular bipartite circulant on ``n`` vertices (halves of size n/2)."""
    if n % 2:
        raise LowerBoundParameterError(f"regular bipartite part needs an even vertex count, got {n}")
    h = n // 2
    if d > h:
        raise LowerBoundParameterError(f"degree {d} exceeds half the vertex count {h}")
    i = np.repeat(np.arange(h), d)
    j = h + (i + np.tile(np.arange(d), h)) % h
    return Graph(n, np.stack([i, j], axis=1))


def integer_cube_root_ceil(t: int) -> int:
    c = int(round(t ** (1.0 / 3.0))) if t > 0 else 0
    while c ** 3 < t:
        c += 1
    while c > 0 and (c - 1) ** 3 >= t:
        c -= 1
    return c


@dataclass(frozen=True)
class LowerBoundInstance:
    kind: str
    n_total: int
    m_total: int
    t_total: int
    clique_size: int
    filler_vertices: int


def lower_bound_family(kind: str, n: int, advice: int, t: int, seed=None):
    """Hard instance pair for the advice-based triangle lower bound.

    Both kinds contain an ``advice``-regular bipartite graph on ``n`` vertices.
    Kind ``"one"`` adds a second ``advice``-regular bipartite graph on
    ``r = 2*C(c, 2)/advice`` vertices, where ``c`` is the ceiling cube root of
    ``t``; it is triangle-free.  Kind ``"two"`` puts a ``c``-clique plus
    ``r - c`` isolated vertices there instead, so both kinds have the same
    vertex and edge counts.  Vertex ids are shuffled with ``seed``.
    """
    kind = kind.lower()
    if kind not in ("one", "two"):
        raise LowerBoundParameterError(f"kind must be 'one' or 'two', got {kind!r}")
    if advice < 1 or t < 1:
        raise LowerBoundParameterError("advice and t must be positive")
    c = integer_cube_root_ceil(t)
    pairs = comb(c, 2)
    if (2 * pairs) % advice:
        raise LowerBoundParameterError(
            f"2*C(c,2) = {2 * pairs} must be divisible by advice = {advice} (c = {c})")
    r = 2 * pairs // advice
    if r % 2:
        raise LowerBoundParameterError(
            f"second part size r = 2*C(c,2)/advice = {r} must be even (advice must divide C(c,2) = {pairs})")
    if r < c:
        raise LowerBoundParameterError(f"second part size r = {r} is smaller than the clique size c = {c}")
    first = regular_bipartite(n, advice)
    if kind == "one":
        second = regular_bipartite(r, advice)
        tri = 0
    else:
        k = clique(c)
        second = Graph(r, k.edges)
        tri = comb(c, 3)
    g = disjoint_union(first, second)
    perm = _rng(seed).permutation(g.n)
    g = relabel(g, perm)
    return g, LowerBoundInstance(kind, g.n, g.m, tri, c, r - c if kind == "two" else 0)
