"""Sublinear triangle and edge counting under untrusted arboricity advice."""
from __future__ import annotations

from .edges import EdgeRunConfig, approx_edges_with_advice, oriented_out_degree, run_edge_batch
from .graph import (
    Graph,
    GraphInvariantError,
    brute_force_triangle_count,
    degeneracy,
    edge_degree,
    exact_triangle_count,
)
from .oracle import BudgetExhausted, OracleHandle, QueryLedger
from .search import (
    AllAdviceRejected,
    GuessOracleSpec,
    adaptive_edges,
    adaptive_triangles,
    search,
    testable_edges,
    testable_triangles,
)
from .triangles import (
    BadAdvice,
    Estimate,
    HeavinessCache,
    Thresholds,
    TriangleRunConfig,
    approx_triangles_with_advice,
    compute_thresholds,
    is_assigned,
    is_heavy,
    run_triangle_batch,
)

__version__ = "0.1.0"
