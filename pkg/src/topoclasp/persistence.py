"""Persistence diagrams in dimensions 0 and 1.

Two independent routes are provided for dimension 0: the standard GF(2)
column reduction of the boundary matrix, and an elder-rule union-find pass.
Classes that never die are kept as *essential* points whose death is capped
at the largest threshold of the filtration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from topoclasp.errors import ContractError
from topoclasp.filtration import SimplicialFiltration


@dataclass(frozen=True)
class PersistenceDiagram:
    births: np.ndarray
    deaths: np.ndarray
    dims: np.ndarray
    essential: np.ndarray
    cap: float
    zero_persistence: int = field(default=0, compare=False)

    @classmethod
    def from_points(cls, points, cap: float, zero_persistence: int = 0) -> "PersistenceDiagram":
        """``points`` is an iterable of ``(birth, death, dim, essential)``."""
        pts = list(points)
        return cls(
            np.array([p[0] for p in pts], dtype=np.float64),
            np.array([p[1] for p in pts], dtype=np.float64),
            np.array([p[2] for p in pts], dtype=np.int64),
            np.array([p[3] for p in pts], dtype=bool),
            float(cap),
            zero_persistence,
        )

    def __len__(self):
        return len(self.births)

    def points(self, dim: int | None = None) -> list[tuple[float, float, int, bool]]:
        """Points as sorted tuples, optionally restricted to one dimension."""
        out = [
            (float(b), float(d), int(k), bool(e))
            for b, d, k, e in zip(self.births, self.deaths, self.dims, self.essential)
            if dim is None or k == dim
        ]
        return sorted(out)

    def persistence(self, dim: int) -> np.ndarray:
        mask = self.dims == dim
        return self.deaths[mask] - self.births[mask]

    def dump(self) -> str:
        """One ``dim birth death essential_flag`` line per point."""
        return "".join(
            f"{k} {b:.9g} {d:.9g} {int(e)}\n" for b, d, k, e in self.points()
        )


def _ordered_simplices(filt: SimplicialFiltration):
    simplices = filt.simplices()
    index = {s: i for i, (s, _) in enumerate(simplices)}
    if len(index) != len(simplices):
        raise ContractError("filtration contains a repeated simplex")
    return simplices, index


def _boundary(simplex: tuple[int, ...], index: dict, j: int) -> list[int]:
    if len(simplex) == 1:
        return []
    rows = []
    for drop in range(len(simplex)):
        face = simplex[:drop] + simplex[drop + 1 :]
        i = index.get(face)
        if i is None:
            raise ContractError(f"face {face} of {simplex} is missing from the filtration")
        if i >= j:
            raise ContractError(f"face {face} does not precede {simplex}")
        rows.append(i)
    return sorted(rows)


def reduce_boundary(filt: SimplicialFiltration) -> PersistenceDiagram:
    """Persistence pairs from the standard left-to-right column reduction."""
    simplices, index = _ordered_simplices(filt)
    pivot_of: dict[int, int] = {}  # low row -> column holding it
    columns: list[list[int]] = []
    paired = set()
    points = []
    zero = 0
    for j, (simplex, value) in enumerate(simplices):
        col = _boundary(simplex, index, j)
        while col and col[-1] in pivot_of:
            other = columns[pivot_of[col[-1]]]
            col = sorted(set(col).symmetric_difference(other))
        columns.append(col)
        if not col:
            continue
        low = col[-1]
        pivot_of[low] = j
        paired.update((low, j))
        birth_simplex, birth = simplices[low]
        if birth == value:
            zero += 1
        else:
            points.append((birth, value, len(birth_simplex) - 1, False))
    cap = filt.cap
    for i, (simplex, value) in enumerate(simplices):
        if i not in paired and len(simplex) <= 2:
            points.append((value, cap, len(simplex) - 1, True))
    return PersistenceDiagram.from_points(points, cap, zero)


class _ElderUnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}
        self.birth: dict[int, tuple[float, int]] = {}

    def add(self, v: int, birth: float, order: int):
        self.parent[v] = v
        self.birth[v] = (birth, order)

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root


def union_find_dim0(filt: SimplicialFiltration) -> PersistenceDiagram:
    """Dimension-0 diagram by the elder rule: when an edge merges two
    components, the one born later dies at the edge's value."""
    simplices, _ = _ordered_simplices(filt)
    uf = _ElderUnionFind()
    points = []
    zero = 0
    for order, (simplex, value) in enumerate(simplices):
        if len(simplex) == 1:
            uf.add(simplex[0], value, order)
        elif len(simplex) == 2:
            ra, rb = uf.find(simplex[0]), uf.find(simplex[1])
            if ra == rb:
                continue
            elder, younger = (ra, rb) if uf.birth[ra] < uf.birth[rb] else (rb, ra)
            uf.parent[younger] = elder
            birth = uf.birth[younger][0]
            if birth == value:
                zero += 1
            else:
                points.append((birth, value, 0, False))
    cap = filt.cap
    for v, p in uf.parent.items():
        if p == v:
            points.append((uf.birth[v][0], cap, 0, True))
    return PersistenceDiagram.from_points(points, cap, zero)


def betti_curve(diagram: PersistenceDiagram, dim: int, thresholds) -> np.ndarray:
    """Number of ``dim``-classes alive at each threshold: finite points with
    ``birth <= a < death`` plus essential points with ``birth <= a``."""
    a = np.asarray(thresholds, dtype=np.float64).reshape(-1, 1)
    mask = diagram.dims == dim
    b = diagram.births[mask]
    d = diagram.deaths[mask]
    ess = diagram.essential[mask]
    alive = (b <= a) & ((a < d) | ess)
    return alive.sum(axis=1).astype(np.int64)
