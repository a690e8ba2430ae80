"""Fixed-length topological feature vectors.

For every filtration scale the vector holds, per homology dimension 0 and 1,
the Betti curve sampled at the scale's quantile thresholds followed by three
diagram statistics: total persistence, maximum persistence and point count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from topoclasp.errors import ConfigError
from topoclasp.filtration import quantile_thresholds, sublevel_filtration
from topoclasp.graphs import Graph, closeness_centrality
from topoclasp.persistence import betti_curve, reduce_boundary
from topoclasp.spectral import DEFAULT_T_MAX, DEFAULT_T_MIN, default_times, hks

FILTRATIONS = ("hks", "degree", "closeness")
DIMS = (0, 1)
STATS = ("total", "max", "count")
# Nodes whose values agree to this many decimals are treated as tied, so that
# round-off in the eigensolver cannot reorder symmetric nodes.
VALUE_DECIMALS = 10


@dataclass(frozen=True)
class VectorizeConfig:
    filtration: str = "hks"
    num_scales: int = 10
    num_thresholds: int = 10
    t_min: float = DEFAULT_T_MIN
    t_max: float = DEFAULT_T_MAX

    def __post_init__(self):
        if self.filtration not in FILTRATIONS:
            raise ConfigError(
                f"unknown filtration {self.filtration!r}; valid options: {', '.join(FILTRATIONS)}"
            )
        if self.num_scales < 1 or self.num_thresholds < 1:
            raise ConfigError("num_scales and num_thresholds must be >= 1")

    @property
    def scales(self) -> int:
        return self.num_scales if self.filtration == "hks" else 1

    @property
    def block(self) -> int:
        return self.num_thresholds + len(STATS)

    @property
    def length(self) -> int:
        return self.scales * len(DIMS) * self.block

    def layout(self) -> list[str]:
        names = []
        for s in range(self.scales):
            for k in DIMS:
                names += [f"s{s}_h{k}_b{j}" for j in range(self.num_thresholds)]
                names += [f"s{s}_h{k}_{stat}" for stat in STATS]
        return names


@dataclass(frozen=True)
class TopoVector:
    values: np.ndarray
    layout: tuple[str, ...]


def node_values(graph: Graph, config: VectorizeConfig) -> np.ndarray:
    """Filtration function values, shape ``[num_nodes, scales]``."""
    if config.filtration == "hks":
        times = default_times(config.num_scales, config.t_min, config.t_max)
        vals = hks(graph, times).values
    elif config.filtration == "degree":
        vals = graph.degrees().astype(np.float64)[:, None]
    else:
        vals = closeness_centrality(graph)[:, None]
    return np.round(vals, VALUE_DECIMALS)


def _block(graph: Graph, values: np.ndarray, n_thresholds: int) -> np.ndarray:
    thresholds = quantile_thresholds(values, n_thresholds)
    diagram = reduce_boundary(sublevel_filtration(graph, values, thresholds))
    out = []
    for k in DIMS:
        curve = betti_curve(diagram, k, thresholds).astype(np.float64)
        curve = np.concatenate([curve, np.full(n_thresholds - len(curve), curve[-1])])
        pers = diagram.persistence(k)
        stats = [pers.sum(), pers.max() if len(pers) else 0.0, float(len(pers))]
        out.append(np.concatenate([curve, stats]))
    return np.concatenate(out)


def vectorize_graph(graph: Graph, config: VectorizeConfig = VectorizeConfig()) -> TopoVector:
    layout = tuple(config.layout())
    if graph.num_nodes == 0:
        return TopoVector(np.zeros(config.length), layout)
    vals = node_values(graph, config)
    parts = [_block(graph, vals[:, s], config.num_thresholds) for s in range(config.scales)]
    return TopoVector(np.concatenate(parts), layout)


def _vector_values(args):
    graph, config = args
    return vectorize_graph(graph, config).values


def vectorize_graphs(graphs, config: VectorizeConfig = VectorizeConfig(), jobs: int = 1) -> np.ndarray:
    """Stack the vectors of many graphs, optionally across processes.

    The result does not depend on ``jobs``.
    """
    graphs = list(graphs)
    if jobs > 1 and len(graphs) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(_vector_values, [(g, config) for g in graphs], chunksize=16))
    else:
        rows = [vectorize_graph(g, config).values for g in graphs]
    if not rows:
        return np.zeros((0, config.length))
    return np.vstack(rows)


def fit_standardizer(train_vectors, floor: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(train_vectors, dtype=np.float64)
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), floor)
    return mean, std


def apply_standardizer(vectors, mean, std, floor: float = 1e-8) -> np.ndarray:
    """Z-score ``vectors``; coordinates whose spread hit the floor map to 0
    (a constant coordinate would otherwise expose round-off in its mean)."""
    std = np.asarray(std, dtype=np.float64)
    scale = np.where(std > floor, 1.0 / std, 0.0)
    return (np.asarray(vectors, dtype=np.float64) - mean) * scale
