import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gossipdda.errors import ConnectivityFailure, ConvergenceFailure, InvalidParam
from gossipdda.topology import (
    Graph,
    check_weights,
    lazify,
    make_graph,
    metropolis_weights,
    read_edgelist,
    spectral_info,
    write_edgelist,
    write_weights_csv,
)


def test_complete_graph_edge_count():
    assert make_graph("complete", 4).m == 6


def test_ring_edges():
    assert make_graph("ring", 4).sorted_edges() == [(0, 1), (0, 3), (1, 2), (2, 3)]


def test_ring_of_two_is_single_edge():
    assert make_graph("ring", 2).sorted_edges() == [(0, 1)]


def test_erdos_renyi_is_deterministic_and_connected():
    a = make_graph("erdos_renyi", 64, seed=7, p=0.5)
    b = make_graph("erdos_renyi", 64, seed=7, p=0.5)
    assert a == b
    assert a.n == 64


def test_grid_shape():
    g = make_graph("grid2d", 12)
    # 3 x 4 grid: 3*3 horizontal + 2*4 vertical
    assert g.m == 17


def test_random_regular_degrees():
    g = make_graph("random_regular", 10, seed=3, d=3)
    assert set(g.degrees.tolist()) == {3}


def test_single_node():
    g = make_graph("complete", 1)
    assert g.m == 0
    np.testing.assert_array_equal(metropolis_weights(g), [[1.0]])


def test_disconnected_graph_rejected():
    with pytest.raises(ConnectivityFailure):
        Graph(4, frozenset({(0, 1), (2, 3)}))


def test_self_loop_rejected():
    with pytest.raises(InvalidParam):
        Graph(3, frozenset({(0, 0), (0, 1), (1, 2)}))


def test_retry_budget_exhausted():
    with pytest.raises(ConnectivityFailure):
        make_graph("erdos_renyi", 40, seed=0, p=0.01)


@pytest.mark.parametrize(
    "kind,kw",
    [("erdos_renyi", {"p": 0.0}), ("erdos_renyi", {"p": 1.5}), ("random_regular", {"d": 3}), ("bogus", {})],
)
def test_bad_params(kind, kw):
    with pytest.raises(InvalidParam):
        make_graph(kind, 5, **kw)


def test_metropolis_examples():
    np.testing.assert_allclose(metropolis_weights(make_graph("ring", 2)), [[0.5, 0.5], [0.5, 0.5]])
    ring = metropolis_weights(make_graph("ring", 4))
    expected = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]]) / 3
    np.testing.assert_allclose(ring, expected, atol=1e-15)
    np.testing.assert_allclose(metropolis_weights(make_graph("complete", 4)), np.full((4, 4), 0.25))


def test_spectral_examples():
    s = spectral_info(metropolis_weights(make_graph("complete", 4)))
    assert s.lambda2 == pytest.approx(0.0, abs=1e-12)
    assert s.gap == pytest.approx(1.0)
    s = spectral_info(metropolis_weights(make_graph("ring", 4)))
    assert s.lambda2 == pytest.approx(1 / 3, abs=1e-12)
    assert s.lambda_min == pytest.approx(-1 / 3, abs=1e-12)
    assert s.rho == pytest.approx(1 / 3, abs=1e-12)
    assert spectral_info(metropolis_weights(make_graph("ring", 2))).lambda2 == pytest.approx(0.0, abs=1e-12)


def test_lazify_examples():
    P = metropolis_weights(make_graph("ring", 4))
    s = spectral_info(lazify(P))
    assert s.lambda_min == pytest.approx(1 / 3, abs=1e-12)
    assert s.lambda2 == pytest.approx(2 / 3, abs=1e-12)
    np.testing.assert_array_equal(lazify(np.eye(3)), np.eye(3))


@pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
def test_complete_graph_gap_bounded_away_from_zero(n):
    assert spectral_info(metropolis_weights(make_graph("complete", n))).gap >= 0.5


@pytest.mark.parametrize("n", [3, 5, 8, 13, 30])
def test_ring_lambda2_closed_form(n):
    s = spectral_info(metropolis_weights(make_graph("ring", n)))
    assert s.lambda2 == pytest.approx((1 + 2 * math.cos(2 * math.pi / n)) / 3, abs=1e-9)


graphs = st.tuples(
    st.sampled_from(["complete", "ring", "grid2d", "erdos_renyi", "random_regular"]),
    st.integers(4, 40),
    st.integers(0, 10_000),
)


@settings(max_examples=60, deadline=None)
@given(graphs)
def test_weight_matrix_invariants(spec):
    kind, n, seed = spec
    if kind == "random_regular" and n * 3 % 2:
        n += 1
    g = make_graph(kind, n, seed)
    P = metropolis_weights(g)
    check_weights(P, g)
    assert np.all(np.abs(P.sum(axis=0) - 1) <= 1e-12)
    assert np.all(np.abs(P.sum(axis=1) - 1) <= 1e-12)
    np.testing.assert_array_equal(P, P.T)
    off = (P > 0) & ~np.eye(n, dtype=bool)
    np.testing.assert_array_equal(off, g.adjacency().astype(bool))
    s = spectral_info(P)
    assert -1e-12 <= s.lambda2 < 1
    assert s.rho >= s.lambda2
    assert 0 < s.gap <= 1
    assert spectral_info(lazify(P)).lambda_min >= -1e-12


def test_check_weights_rejects_non_stochastic():
    P = metropolis_weights(make_graph("ring", 4)).copy()
    P[0, 0] += 0.1
    with pytest.raises(InvalidParam):
        check_weights(P)


def test_sparse_eigensolver_matches_dense():
    from gossipdda import topology

    g = make_graph("erdos_renyi", 300, seed=2, p=0.05)
    P = metropolis_weights(g)
    sparse = spectral_info(P)
    ev = np.linalg.eigvalsh(P)
    assert sparse.lambda2 == pytest.approx(ev[-2], rel=1e-10)
    assert sparse.lambda_min == pytest.approx(ev[0], rel=1e-10)
    assert topology.DENSE_EIG_MAX_N < 300


def test_sparse_eigensolver_stall(monkeypatch):
    from scipy.sparse.linalg import ArpackNoConvergence

    from gossipdda import topology

    def stall(*a, **k):
        raise ArpackNoConvergence("stalled", np.array([]), np.array([]))

    monkeypatch.setattr(topology, "eigsh", stall)
    monkeypatch.setattr(topology, "DENSE_EIG_MAX_N", 2)
    with pytest.raises(ConvergenceFailure):
        spectral_info(metropolis_weights(make_graph("ring", 5)))


def test_edgelist_roundtrip(tmp_path):
    g = make_graph("erdos_renyi", 12, seed=4)
    path = tmp_path / "g.txt"
    write_edgelist(g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"12 {g.m}"
    assert read_edgelist(path) == g


def test_weights_csv(tmp_path):
    P = metropolis_weights(make_graph("ring", 5))
    write_weights_csv(P, tmp_path / "w.csv")
    np.testing.assert_allclose(np.loadtxt(tmp_path / "w.csv", delimiter=","), P, rtol=0, atol=1e-15)
