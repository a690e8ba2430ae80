"""GIN structural encoder, MLP topological encoder and the fusion head.

Parameters live in a flat ``{name: Tensor}`` dict. Weight matrices are stored
``[fan_in, fan_out]`` and applied as ``x @ W``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from topoclasp import autodiff as ad
from topoclasp.autodiff import Tensor
from topoclasp.errors import ContractError
from topoclasp.graphs import Graph

Params = dict[str, Tensor]


@dataclass(frozen=True)
class ModelShape:
    d_in: int
    topo_dim: int
    num_classes: int
    hidden: int = 128
    layers: int = 3
    proj_dim: int = 64


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(shape: ModelShape, rng: np.random.Generator) -> Params:
    """Every parameter of every ablation mode, drawn in a fixed order so that
    all modes start from the same weights for a given seed."""
    h = shape.hidden
    p: Params = {}

    def linear(prefix, fan_in, fan_out, bias=True):
        p[f"{prefix}.w"] = Tensor(glorot(rng, fan_in, fan_out), True, f"{prefix}.w")
        if bias:
            p[f"{prefix}.b"] = Tensor(np.zeros(fan_out), True, f"{prefix}.b")

    for k in range(shape.layers):
        p[f"gin{k}.eps"] = Tensor(0.0, True, f"gin{k}.eps")
        linear(f"gin{k}.mlp0", shape.d_in if k == 0 else h, h)
        linear(f"gin{k}.mlp1", h, h)
    linear("topo.mlp0", shape.topo_dim, h)
    linear("topo.mlp1", h, h)
    linear("fusion", 2 * h, h)
    linear("cls", h, shape.num_classes)
    linear("proj", h, shape.proj_dim, bias=False)
    linear("topo_head", h, shape.num_classes)
    linear("gnn_head", h, shape.num_classes)
    return p


@dataclass(frozen=True)
class Batch:
    x: np.ndarray  # stacked node features
    adjacency: sp.csr_matrix  # block-diagonal, symmetric
    graph_ids: np.ndarray
    num_graphs: int
    topo: np.ndarray
    labels: np.ndarray


def make_batch(graphs: Sequence[Graph], topo, labels=None) -> Batch:
    if not graphs:
        raise ContractError("empty batch")
    if any(g.num_nodes == 0 for g in graphs):
        raise ContractError("graphs with zero nodes cannot be batched")
    sizes = np.array([g.num_nodes for g in graphs])
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    edges = np.vstack([g.edges + off for g, off in zip(graphs, offsets)])
    n = int(sizes.sum())
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    if labels is None:
        labels = [g.label for g in graphs]
    return Batch(
        x=np.vstack([g.node_features for g in graphs]),
        adjacency=adj,
        graph_ids=np.repeat(np.arange(len(graphs)), sizes),
        num_graphs=len(graphs),
        topo=np.asarray(topo, dtype=np.float64).reshape(len(graphs), -1),
        labels=np.asarray(labels, dtype=np.int64),
    )


def linear(x, params: Params, prefix: str) -> Tensor:
    out = ad.matmul(x, params[f"{prefix}.w"])
    bias = params.get(f"{prefix}.b")
    return out if bias is None else ad.add(out, bias)


def gin_forward(batch: Batch, params: Params) -> Tensor:
    """``h <- MLP((1 + eps) h + sum of neighbour h)`` per layer, then mean
    pooling per graph."""
    h = Tensor(batch.x)
    k = 0
    while f"gin{k}.eps" in params:
        scale = ad.add(1.0, params[f"gin{k}.eps"])
        agg = ad.add(ad.mul(h, scale), ad.spmm(batch.adjacency, h))
        h = ad.relu(linear(agg, params, f"gin{k}.mlp0"))
        h = ad.relu(linear(h, params, f"gin{k}.mlp1"))
        k += 1
    return ad.segment_mean(h, batch.graph_ids, batch.num_graphs)


def topo_forward(batch: Batch, params: Params) -> Tensor:
    hidden = ad.relu(linear(Tensor(batch.topo), params, "topo.mlp0"))
    return linear(hidden, params, "topo.mlp1")


def fuse_and_classify(z: Tensor, u: Tensor, params: Params):
    """Returns ``(logits, fused, projection)``; softmax is left to the loss."""
    if z.shape != u.shape:
        raise ContractError(f"structural {z.shape} and topological {u.shape} widths differ")
    f = ad.relu(linear(ad.concat([z, u]), params, "fusion"))
    logits = linear(f, params, "cls")
    p = ad.l2_normalize(linear(f, params, "proj"))
    return logits, f, p


MODES = ("topo", "gnn", "concat", "tcl")


def forward(batch: Batch, params: Params, mode: str) -> dict[str, Tensor]:
    """Run the branches ``mode`` needs; returns logits plus embeddings."""
    if mode == "topo":
        u = topo_forward(batch, params)
        return {"logits": linear(u, params, "topo_head"), "u": u}
    if mode == "gnn":
        z = gin_forward(batch, params)
        return {"logits": linear(z, params, "gnn_head"), "z": z}
    if mode not in MODES:
        raise ContractError(f"unknown mode {mode!r}")
    z = gin_forward(batch, params)
    u = topo_forward(batch, params)
    logits, f, p = fuse_and_classify(z, u, params)
    return {"logits": logits, "z": z, "u": u, "f": f, "p": p}


def predict(batch: Batch, params: Params, mode: str) -> np.ndarray:
    return np.argmax(forward(batch, params, mode)["logits"].data, axis=1)


# ---- checkpoints ----------------------------------------------------------


def save_params(params: Params, path) -> None:
    """``.npz`` is bit-exact binary; ``.json`` stores named arrays with shapes."""
    path = Path(path)
    if path.suffix == ".json":
        doc = {
            name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
            for name, t in params.items()
        }
        path.write_text(json.dumps(doc))
    else:
        with open(path, "wb") as fh:
            np.savez(fh, **{name: t.data for name, t in params.items()})


def load_params(path) -> Params:
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        return {
            name: Tensor(np.array(v["data"], dtype=np.float64).reshape(v["shape"]), True, name)
            for name, v in doc.items()
        }
    with np.load(path) as npz:
        return {name: Tensor(npz[name].copy(), True, name) for name in npz.files}
