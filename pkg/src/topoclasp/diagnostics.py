"""Full-model gradient check on a small synthetic batch."""

from __future__ import annotations

import numpy as np

from topoclasp.autodiff import GradCheckReport, grad_check
from topoclasp.graphs import Graph
from topoclasp.loss import LossConfig, joint_loss
from topoclasp.model import Batch, ModelShape, forward, init_params, linear, make_batch


def synthetic_batch(rng: np.random.Generator, d_in: int = 3, topo_dim: int = 6) -> Batch:
    """A 4-cycle, a triangle and a house-shaped graph with random features."""
    graphs = [
        Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], rng.normal(size=(4, d_in)), 0),
        Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)], rng.normal(size=(3, d_in)), 1),
        Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 4)], rng.normal(size=(5, d_in)), 1),
    ]
    return make_batch(graphs, rng.normal(size=(3, topo_dim)))


def full_model_gradcheck(
    seed: int = 0,
    hidden: int = 8,
    contrast_on: str = "zu",
    loss: LossConfig = LossConfig(),
    h: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Check every parameter the GraphTCL objective touches: the GIN ``eps``
    scalars and MLPs, the topological MLP, fusion, classifier and (with
    ``contrast_on="proj"``) the projection head."""
    rng = np.random.default_rng(seed)
    batch = synthetic_batch(rng)
    shape = ModelShape(batch.x.shape[1], batch.topo.shape[1], 2, hidden, 3, proj_dim=max(2, hidden // 2))
    params = init_params(shape, rng)
    for name, p in params.items():
        if name.endswith(".eps"):
            p.data = np.asarray(rng.uniform(-0.2, 0.2))  # away from the initial 0
        elif name.endswith(".b"):
            p.data = rng.normal(scale=0.1, size=p.shape)

    def objective():
        out = forward(batch, params, "tcl")
        z, u = out["z"], out["u"]
        if contrast_on == "proj":
            z, u = linear(z, params, "proj"), linear(u, params, "proj")
        return joint_loss(out["logits"], batch.labels, z, u, loss)

    checked = {n: p for n, p in params.items() if not n.startswith(("topo_head", "gnn_head"))}
    if contrast_on != "proj":
        checked.pop("proj.w")
    return grad_check(objective, checked, h=h, tol=tol)
