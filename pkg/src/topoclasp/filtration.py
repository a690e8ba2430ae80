"""Sublevel filtrations of node scalar fields, lifted to the clique complex
(vertices, edges and triangles)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from topoclasp.errors import ContractError
from topoclasp.graphs import Graph


def quantile_thresholds(values, n: int) -> np.ndarray:
    """Linear-interpolation quantiles at levels ``k/n`` (``k = 1..n``),
    deduplicated. The last threshold is always ``max(values)``."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ContractError("cannot take quantiles of an empty vector")
    if n < 1:
        raise ContractError("need at least one threshold")
    levels = np.arange(1, n + 1) / n
    return np.unique(np.quantile(values, levels, method="linear"))


def triangles(graph: Graph) -> list[tuple[int, int, int]]:
    """All 3-cliques ``(u, v, w)`` with ``u < v < w``."""
    nbrs = [set(s) for s in graph.neighbors()]
    out = []
    for u, v in graph.edges:
        for w in nbrs[u] & nbrs[v]:
            if w > v:
                out.append((int(u), int(v), int(w)))
    out.sort()
    return out


@dataclass(frozen=True)
class SimplicialFiltration:
    vertices: list  # (node, value)
    edges: list  # (u, v, value)
    triangles: list  # (u, v, w, value)
    thresholds: np.ndarray

    @property
    def cap(self) -> float:
        return float(self.thresholds[-1])

    def simplices(self) -> list[tuple[tuple[int, ...], float]]:
        """Every simplex as ``(sorted vertex tuple, value)`` in filtration
        order: by value, then dimension, then lexicographically."""
        items = [((v,), f) for v, f in self.vertices]
        items += [((u, v), f) for u, v, f in self.edges]
        items += [((u, v, w), f) for u, v, w, f in self.triangles]
        items.sort(key=lambda s: (s[1], len(s[0]), s[0]))
        return items

    def at(self, alpha: float) -> "SimplicialFiltration":
        """The subcomplex of simplices with value <= ``alpha``."""
        return SimplicialFiltration(
            [s for s in self.vertices if s[-1] <= alpha],
            [s for s in self.edges if s[-1] <= alpha],
            [s for s in self.triangles if s[-1] <= alpha],
            self.thresholds[self.thresholds <= alpha],
        )


def sublevel_filtration(graph: Graph, node_values, thresholds) -> SimplicialFiltration:
    """Clique-lifted sublevel filtration: every simplex enters at the maximum
    of its vertex values. Simplices above the last threshold are left out."""
    f = np.asarray(node_values, dtype=np.float64).ravel()
    if len(f) != graph.num_nodes:
        raise ContractError(f"{len(f)} node values for {graph.num_nodes} nodes")
    thresholds = np.asarray(thresholds, dtype=np.float64).ravel()
    if thresholds.size == 0 or np.any(np.diff(thresholds) <= 0):
        raise ContractError("thresholds must be non-empty and strictly increasing")
    top = thresholds[-1]
    verts = [(v, float(f[v])) for v in range(graph.num_nodes) if f[v] <= top]
    edges = []
    for u, v in graph.edges:
        val = max(f[u], f[v])
        if val <= top:
            edges.append((int(u), int(v), float(val)))
    tris = []
    for u, v, w in triangles(graph):
        val = max(f[u], f[v], f[w])
        if val <= top:
            tris.append((u, v, w, float(val)))
    return SimplicialFiltration(verts, edges, tris, thresholds)
