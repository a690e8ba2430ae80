import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete_graph, cycle_graph, path_graph
from oracles import random_graph
from topoclasp.errors import ContractError
from topoclasp.graphs import Graph
from topoclasp.spectral import default_times, eig_sym, heat_kernel_oracle, hks, laplacian

# closed form on K2: eigenpairs (0, [1,1]/sqrt2), (2, [1,-1]/sqrt2)
K2_HALF = 0.5 + 0.5 * math.exp(-1.0)


def test_laplacian_examples():
    np.testing.assert_array_equal(laplacian(path_graph(2)), [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(laplacian(Graph.from_edges(1, [])), [[0]])
    np.testing.assert_array_equal(laplacian(complete_graph(3)), 3 * np.eye(3) - np.ones((3, 3)))


def test_laplacian_rows_sum_to_zero(rng):
    for _ in range(20):
        lap = laplacian(random_graph(rng, 10, 0.4))
        np.testing.assert_array_equal(lap, lap.T)
        np.testing.assert_allclose(lap.sum(axis=1), 0)


def test_eig_sym_examples():
    np.testing.assert_allclose(eig_sym(laplacian(path_graph(2))).eigenvalues, [0, 2], atol=1e-12)
    # circulant closed form 2 - 2 cos(2 pi k / 4)
    c4 = sorted(2 - 2 * np.cos(2 * np.pi * np.arange(4) / 4))
    np.testing.assert_allclose(eig_sym(laplacian(cycle_graph(4))).eigenvalues, c4, atol=1e-12)
    dec = eig_sym(np.zeros((3, 3)))
    np.testing.assert_array_equal(dec.eigenvalues, 0)
    np.testing.assert_allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(3), atol=1e-12)


def test_eig_sym_rejects_asymmetric():
    with pytest.raises(ContractError):
        eig_sym([[0.0, 1.0], [0.0, 0.0]])


def test_decomposition_invariants(rng):
    for _ in range(30):
        lap = laplacian(random_graph(rng, int(rng.integers(1, 21)), 0.3))
        dec = eig_sym(lap)
        assert dec.eigenvalues[0] >= -1e-8
        assert np.all(np.diff(dec.eigenvalues) >= 0)
        phi = dec.eigenvectors
        assert np.max(np.abs(phi.T @ phi - np.eye(len(phi)))) <= 1e-8
        assert np.max(np.abs(dec.reconstruct() - lap)) <= 1e-8 * max(1, np.abs(lap).max())


def test_hks_examples():
    np.testing.assert_allclose(hks(path_graph(2), [0.5]).values.ravel(), [K2_HALF] * 2, rtol=1e-12)
    assert abs(K2_HALF - 0.683940) < 1e-6
    np.testing.assert_allclose(hks(Graph.from_edges(1, []), [0.1, 3.0]).values, [[1.0, 1.0]])
    for g in (cycle_graph(6), complete_graph(5)):
        vals = hks(g, default_times()).values
        np.testing.assert_allclose(vals, np.broadcast_to(vals[0], vals.shape), rtol=1e-10)


def test_hks_rejects_bad_times():
    with pytest.raises(ContractError):
        hks(path_graph(2), [0.0, 1.0])
    with pytest.raises(ContractError):
        hks(path_graph(2), [2.0, 1.0])


def test_hks_values_in_unit_interval(rng):
    for _ in range(20):
        vals = hks(random_graph(rng, 12, 0.3), default_times()).values
        assert np.all(vals > 0) and np.all(vals <= 1 + 1e-12)


def test_default_times():
    t = default_times()
    assert len(t) == 10
    assert t[0] == pytest.approx(0.1) and t[-1] == pytest.approx(10.0)
    np.testing.assert_allclose(np.diff(np.log(t)), np.log(100) / 9)


def test_oracle_examples():
    np.testing.assert_array_equal(heat_kernel_oracle(cycle_graph(5), 0.0), np.eye(5))
    np.testing.assert_allclose(np.diag(heat_kernel_oracle(path_graph(2), 0.5)), [K2_HALF] * 2, rtol=1e-12)
    np.testing.assert_allclose(heat_kernel_oracle(path_graph(5), 200.0), np.full((5, 5), 0.2), atol=1e-10)


def test_trace_identity_and_monotonicity(rng):
    times = default_times()
    for _ in range(40):
        g = random_graph(rng, int(rng.integers(1, 21)), rng.choice([0.2, 0.5]))
        vals = hks(g, times).values
        lam = eig_sym(laplacian(g)).eigenvalues
        np.testing.assert_allclose(vals.sum(axis=0), np.exp(-np.outer(lam, times)).sum(axis=0), atol=1e-10)
        assert np.all(vals[:, :-1] >= vals[:, 1:] - 1e-10)


def test_basis_invariance_on_degenerate_spectrum():
    # C6 and K5 have repeated eigenvalues; the oracle never picks a basis
    for g in (cycle_graph(6), complete_graph(5), Graph.from_edges(6, [(0, 1), (2, 3), (4, 5)])):
        for t in default_times():
            np.testing.assert_allclose(hks(g, [t]).values.ravel(), np.diag(heat_kernel_oracle(g, t)), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.floats(0.1, 0.9), st.integers(0, 2**31))
def test_hks_permutation_equivariant(n, p, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, p)
    perm = rng.permutation(n)
    a = hks(g, default_times()).values
    b = hks(g.permuted(perm), default_times()).values
    np.testing.assert_allclose(b[perm], a, atol=1e-10)
