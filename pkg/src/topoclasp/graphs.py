"""Graphs, datasets and TU-format ingestion.

A TU dataset directory holds flat text files that describe every graph of
the collection at once: a block-diagonal edge list over global 1-based node
ids, a per-node graph indicator, one label per graph and optionally one
label per node.
"""

from __future__ import annotations

import logging
import os
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from topoclasp.errors import ContractError, FormatError, IntegrityError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """An undirected, unweighted graph with node features and a class label.

    ``edges`` is an ``(m, 2)`` integer array with ``u < v`` in every row,
    rows sorted lexicographically; there are no self-loops or duplicates.
    """

    num_nodes: int
    edges: np.ndarray
    node_features: np.ndarray
    label: int = 0

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        feats = np.asarray(self.node_features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(-1, 1)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "node_features", feats)
        if self.num_nodes < 0:
            raise ContractError("num_nodes must be non-negative")
        if feats.shape[0] != self.num_nodes:
            raise ContractError(
                f"node_features has {feats.shape[0]} rows for {self.num_nodes} nodes"
            )
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.num_nodes:
                raise ContractError("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ContractError("edges must be stored as (u, v) with u < v")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise ContractError("duplicate edges")
        edges.setflags(write=False)
        feats.setflags(write=False)

    @classmethod
    def from_edges(cls, num_nodes, pairs, node_features=None, label=0) -> "Graph":
        """Build a graph from arbitrary pairs, canonicalising orientation and
        dropping self-loops and duplicates."""
        edges, _, _ = _canonical_edges(pairs)
        if node_features is None:
            node_features = np.ones((num_nodes, 1))
        return cls(num_nodes, edges, node_features, int(label))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        np.add.at(deg, self.edges.ravel(), 1)
        return deg

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix."""
        a = np.zeros((self.num_nodes, self.num_nodes))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].append(int(v))
            nbrs[v].append(int(u))
        return nbrs

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel nodes so that old node ``i`` becomes ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.num_nodes)):
            raise ContractError("perm must be a permutation of range(num_nodes)")
        feats = np.empty_like(self.node_features)
        feats[perm] = self.node_features
        return Graph.from_edges(self.num_nodes, perm[self.edges], feats, self.label)

    def with_features(self, node_features) -> "Graph":
        return Graph(self.num_nodes, self.edges, node_features, self.label)


@dataclass(frozen=True)
class Dataset:
    name: str
    graphs: tuple[Graph, ...]
    num_classes: int
    d_in: int
    has_node_labels: bool = False
    label_values: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for g in self.graphs:
            if not 0 <= g.label < self.num_classes:
                raise ContractError(f"label {g.label} outside [0, {self.num_classes})")
            if g.node_features.shape[1] != self.d_in:
                raise ContractError("graphs disagree on feature width")

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)


def _canonical_edges(pairs):
    """Return sorted unique ``u < v`` edges, plus counts of dropped self-loops
    and duplicates."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    loops = arr[:, 0] == arr[:, 1]
    arr = np.sort(arr[~loops], axis=1)
    uniq = np.unique(arr, axis=0) if len(arr) else arr
    return uniq, int(loops.sum()), len(arr) - len(uniq)


def _tu_path(directory: Path, name: str, suffix: str) -> Path:
    return directory / f"{name}_{suffix}.txt"


def _read_int_table(path: Path, columns: int) -> np.ndarray:
    if not path.is_file():
        raise FormatError(f"missing file: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != columns:
                raise FormatError(f"{path}:{lineno}: expected {columns} value(s), got {line!r}")
            try:
                rows.append([int(p) for p in parts])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: not an integer: {line!r}") from None
    return np.array(rows, dtype=np.int64).reshape(-1, columns)


def _dense_codes(values: np.ndarray) -> tuple[np.ndarray, tuple]:
    uniq = np.unique(values)
    return np.searchsorted(uniq, values), tuple(int(u) for u in uniq)


def parse_tu_dataset(directory, name: str) -> Dataset:
    """Parse a TU benchmark dataset from ``directory``.

    Graph labels are remapped onto ``0..C-1`` in sorted order of their raw
    values. Node labels, when present, become one-hot node features;
    otherwise every node gets the constant feature 1 (see
    :func:`degree_features` for label-free datasets).
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"dataset directory not found: {directory}")
    edges_raw = _read_int_table(_tu_path(directory, name, "A"), 2)
    indicator = _read_int_table(_tu_path(directory, name, "graph_indicator"), 1).ravel()
    graph_labels = _read_int_table(_tu_path(directory, name, "graph_labels"), 1).ravel()
    node_label_path = _tu_path(directory, name, "node_labels")
    node_labels = None
    if node_label_path.is_file():
        node_labels = _read_int_table(node_label_path, 1).ravel()

    n_total = len(indicator)
    if n_total == 0:
        raise FormatError(f"{name}: empty graph indicator")
    if indicator[0] != 1 or np.any(np.diff(indicator) < 0) or np.any(np.diff(indicator) > 1):
        raise IntegrityError(f"{name}: graph indicator is not consecutive from 1")
    num_graphs = int(indicator[-1])
    if len(graph_labels) != num_graphs:
        raise IntegrityError(
            f"{name}: {len(graph_labels)} graph labels for {num_graphs} graphs"
        )
    if node_labels is not None and len(node_labels) != n_total:
        raise IntegrityError(f"{name}: {len(node_labels)} node labels for {n_total} nodes")
    if len(edges_raw) and (edges_raw.min() < 1 or edges_raw.max() > n_total):
        raise IntegrityError(f"{name}: node id out of range 1..{n_total}")

    gid = indicator - 1
    # first global node index of each graph
    starts = np.searchsorted(gid, np.arange(num_graphs + 1))
    edges0 = edges_raw - 1
    eg = gid[edges0[:, 0]] if len(edges0) else np.zeros(0, dtype=np.int64)
    if len(edges0) and np.any(eg != gid[edges0[:, 1]]):
        raise IntegrityError(f"{name}: edge joins nodes of different graphs")

    y, label_values = _dense_codes(graph_labels)
    if node_labels is not None:
        codes, _ = _dense_codes(node_labels)
        width = int(codes.max()) + 1
        features = np.zeros((n_total, width))
        features[np.arange(n_total), codes] = 1.0
    else:
        width = 1
        features = np.ones((n_total, 1))

    order = np.argsort(eg, kind="stable")
    edges0, eg = edges0[order], eg[order]
    edge_starts = np.searchsorted(eg, np.arange(num_graphs + 1))
    graphs = []
    loops = dups = 0
    for g in range(num_graphs):
        lo, hi = starts[g], starts[g + 1]
        local = edges0[edge_starts[g] : edge_starts[g + 1]] - lo
        canon, n_loops, _ = _canonical_edges(local)
        loops += n_loops
        # both orientations of an edge are expected; repeated oriented lines are not
        dups += len(local) - len(np.unique(local, axis=0)) if len(local) else 0
        graphs.append(Graph(int(hi - lo), canon, features[lo:hi], int(y[g])))
    if loops or dups:
        log.warning("%s: dropped %d self-loop(s) and %d duplicate edge line(s)", name, loops, dups)
    return Dataset(
        name=name,
        graphs=tuple(graphs),
        num_classes=len(label_values),
        d_in=width,
        has_node_labels=node_labels is not None,
        label_values=label_values,
    )


def write_tu_dataset(dataset: Dataset, directory) -> None:
    """Serialise ``dataset`` in TU format (labels written as dense codes).

    Node labels are written only when the features are one-hot rows.
    """
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    name = dataset.name
    offset = 0
    with open(_tu_path(directory, name, "A"), "w") as fa, open(
        _tu_path(directory, name, "graph_indicator"), "w"
    ) as fi, open(_tu_path(directory, name, "graph_labels"), "w") as fl:
        for gi, g in enumerate(dataset.graphs, 1):
            for u, v in g.edges:
                fa.write(f"{u + offset + 1}, {v + offset + 1}\n")
                fa.write(f"{v + offset + 1}, {u + offset + 1}\n")
            fi.write(f"{gi}\n" * g.num_nodes)
            fl.write(f"{g.label}\n")
            offset += g.num_nodes
    if dataset.has_node_labels:
        with open(_tu_path(directory, name, "node_labels"), "w") as fn:
            for g in dataset.graphs:
                for row in g.node_features:
                    fn.write(f"{int(np.argmax(row))}\n")


def degree_features(dataset: Dataset, width: int | None = None) -> Dataset:
    """Replace node features by one-hot node degrees.

    The one-hot width is ``max degree + 1`` over the whole dataset unless
    ``width`` is given.
    """
    degs = [g.degrees() for g in dataset.graphs]
    max_deg = max((int(d.max()) for d in degs if len(d)), default=0)
    if width is None:
        width = max_deg + 1
    elif width < max_deg + 1:
        raise ContractError(f"width {width} cannot encode degree {max_deg}")
    graphs = []
    for g, d in zip(dataset.graphs, degs):
        feats = np.zeros((g.num_nodes, width))
        feats[np.arange(g.num_nodes), d] = 1.0
        graphs.append(g.with_features(feats))
    return replace(dataset, graphs=tuple(graphs), d_in=width, has_node_labels=False)


def closeness_centrality(graph: Graph) -> np.ndarray:
    """Per-node closeness ``(n_v - 1) / sum of BFS distances`` within the
    node's own connected component (``n_v`` its size); 0 for isolated nodes."""
    nbrs = graph.neighbors()
    out = np.zeros(graph.num_nodes)
    for src in range(graph.num_nodes):
        dist = {src: 0}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for u in nbrs[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    queue.append(u)
        total = sum(dist.values())
        if total:
            out[src] = (len(dist) - 1) / total
    return out


def connected_components(graph: Graph) -> int:
    nbrs = graph.neighbors()
    seen = np.zeros(graph.num_nodes, dtype=bool)
    count = 0
    for s in range(graph.num_nodes):
        if seen[s]:
            continue
        count += 1
        seen[s] = True
        stack = [s]
        while stack:
            v = stack.pop()
            for u in nbrs[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
    return count
