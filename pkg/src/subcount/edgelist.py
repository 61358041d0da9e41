"""Plain-text edge-list format.

A file starts with a header line ``# n=<vertex count>``, followed by one
``u v`` pair per line with 0-based ids and ``u < v``.  Other lines starting
with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .graph import Graph, GraphInvariantError

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_INVARIANT = 3

_HEADER = re.compile(r"^#\s*n\s*=\s*(\d+)\s*$")


class EdgeListFormatError(ValueError):
    """Malformed line or missing header."""


def write_edge_list(g: Graph, path) -> None:
    lines = [f"# n={g.n}"]
    lines.extend(f"{u} {v}" for u, v in g.edges.tolist())
    Path(path).write_text("\n".join(lines) + "\n")


def _parse(text: str):
    n = None
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if n is None:
                match = _HEADER.match(line)
                if match:
                    n = int(match.group(1))
            continue
        if n is None:
            raise EdgeListFormatError(f"line {lineno}: edge before the '# n=' header")
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListFormatError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListFormatError(f"line {lineno}: non-integer vertex id in {raw!r}") from None
        pairs.append((lineno, u, v))
    if n is None:
        raise EdgeListFormatError("missing '# n=<count>' header")
    return n, pairs


def _check(n: int, pairs) -> np.ndarray:
    seen = set()
    for lineno, u, v in pairs:
        if u == v:
            raise GraphInvariantError(f"line {lineno}: self-loop at {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphInvariantError(f"line {lineno}: vertex id out of range [0, {n})")
        if u > v:
            raise GraphInvariantError(f"line {lineno}: pair ({u}, {v}) is not written with u < v")
        if (u, v) in seen:
            raise GraphInvariantError(f"line {lineno}: duplicate edge ({u}, {v})")
        seen.add((u, v))
    return np.array([(u, v) for _, u, v in pairs], dtype=np.int64).reshape(-1, 2)


def read_edge_list(path) -> Graph:
    """Load a graph, raising ``EdgeListFormatError`` or ``GraphInvariantError``."""
    n, pairs = _parse(Path(path).read_text())
    return Graph(n, _check(n, pairs))


def validate_edge_list(path) -> tuple[int, str]:
    """Return ``(exit_code, message)``: 0 valid, 2 malformed, 3 invariant violation."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return EXIT_MALFORMED, f"cannot read {path}: {exc}"
    try:
        n, pairs = _parse(text)
    except EdgeListFormatError as exc:
        return EXIT_MALFORMED, str(exc)
    try:
        _check(n, pairs)
    except GraphInvariantError as exc:
        return EXIT_INVARIANT, str(exc)
    return EXIT_OK, f"ok: n={n} m={len(pairs)}"
