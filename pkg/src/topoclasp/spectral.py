"""Combinatorial Laplacian, symmetric eigendecomposition and the Heat Kernel
Signature.

All arithmetic is float64. The eigendecomposition is dense: TU graphs have at
most a few hundred nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from topoclasp.errors import ContractError
from topoclasp.graphs import Graph

DEFAULT_NUM_SCALES = 10
DEFAULT_T_MIN = 0.1
DEFAULT_T_MAX = 10.0


def default_times(num_scales: int = DEFAULT_NUM_SCALES, t_min=DEFAULT_T_MIN, t_max=DEFAULT_T_MAX):
    """Log-spaced diffusion times; a single scale uses ``t_min``."""
    if num_scales < 1:
        raise ContractError("num_scales must be >= 1")
    if num_scales == 1:
        return np.array([float(t_min)])
    return np.geomspace(t_min, t_max, num_scales)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        phi = self.eigenvectors
        return (phi * self.eigenvalues) @ phi.T


@dataclass(frozen=True)
class HksField:
    values: np.ndarray  # [num_nodes, num_scales]
    times: np.ndarray


def laplacian(graph: Graph) -> np.ndarray:
    """``L = D - A`` as a dense float64 matrix."""
    a = graph.adjacency()
    return np.diag(a.sum(axis=1)) - a


def eig_sym(matrix, sym_tol: float = 1e-10) -> SpectralDecomposition:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > sym_tol:
        raise ContractError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(m)
    return SpectralDecomposition(vals, vecs)


def hks(graph: Graph, times) -> HksField:
    """Heat retained at each node: ``sum_i exp(-lambda_i t) phi_i(v)**2``."""
    times = np.asarray(times, dtype=np.float64).ravel()
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ContractError("times must be strictly positive and ascending")
    if graph.num_nodes == 0:
        return HksField(np.zeros((0, len(times))), times)
    dec = eig_sym(laplacian(graph))
    lam = np.clip(dec.eigenvalues, 0.0, None)  # PSD; drop -1e-16 noise
    weights = np.exp(-np.outer(lam, times))  # [n_eig, n_times]
    values = (dec.eigenvectors**2) @ weights
    return HksField(values, times)


def expm_taylor(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a truncated Taylor
    series. Used as a basis-free check on :func:`hks`."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    norm = np.max(np.sum(np.abs(a), axis=1)) if n else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    scaled = a / 2.0**squarings
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ scaled / k
        result = result + term
        if np.max(np.abs(term)) < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def heat_kernel_oracle(graph: Graph, t: float) -> np.ndarray:
    """``H_t = exp(-t L)`` without any eigendecomposition."""
    if t < 0:
        raise ContractError("t must be non-negative")
    return expm_taylor(-t * laplacian(graph))
