import math

import numpy as np
import pytest

from matchbal import graphs, spectral
from matchbal.errors import InvalidSpec

import oracles

# frozen from the general eigen solver, Gauss-Seidel hitting times and
# energy-minimising resistance oracles (see oracles.py)
CYCLE4 = {"lambda_gap": 1.0, "res_star": 0.75, "res_diam": 1.0, "t_even": 3.0, "t_hit": 4.0,
          "T_of_G": 1.0}
COMPLETE4 = {"lambda_gap": 4 / 3, "t_hit": 3.0, "t_even": 3.0, "T_of_G": 0.75}


def test_frozen_values_agree_with_oracles():
    assert oracles.normalized_gap_general(4, oracles.cycle_edges(4)) == pytest.approx(1.0, abs=1e-12)
    assert oracles.normalized_gap_general(4, oracles.complete_edges(4)) == pytest.approx(4 / 3, abs=1e-12)
    assert oracles.normalized_gap_general(3, oracles.cycle_edges(3)) == pytest.approx(1.5, abs=1e-12)
    h = oracles.hitting_times_iterative(4, oracles.cycle_edges(4))
    assert h[0, 1] == pytest.approx(3.0, rel=1e-10) and h[0, 2] == pytest.approx(4.0, rel=1e-10)
    assert oracles.dirichlet_resistance(4, oracles.cycle_edges(4), 0, 1) == pytest.approx(0.75, rel=1e-8)
    assert oracles.dirichlet_resistance(4, oracles.cycle_edges(4), 0, 2) == pytest.approx(1.0, rel=1e-8)
    hk = oracles.hitting_times_iterative(4, oracles.complete_edges(4))
    assert np.allclose(hk[~np.eye(4, dtype=bool)], 3.0)


def test_cycle4_analytics():
    a = spectral.analyze(graphs.cycle(4))
    for key, val in CYCLE4.items():
        assert getattr(a, key) == pytest.approx(val, abs=1e-12), key
    assert a.t_even / a.n == pytest.approx(0.75)


def test_complete4_analytics():
    a = spectral.analyze(graphs.complete(4))
    for key, val in COMPLETE4.items():
        assert getattr(a, key) == pytest.approx(val, abs=1e-12), key


def test_cycle3_gap():
    assert spectral.normalized_laplacian_gap(graphs.cycle(3)) == pytest.approx(1.5, abs=1e-12)


def test_cycle4_pairwise():
    g = graphs.cycle(4)
    assert spectral.effective_resistance(g, 0, 1) == pytest.approx(0.75)
    assert spectral.effective_resistance(g, 0, 2) == pytest.approx(1.0)
    assert spectral.hitting_time(g, 0, 1) == pytest.approx(3.0)
    assert spectral.hitting_time(g, 0, 2) == pytest.approx(4.0)


def test_same_node_rejected():
    g = graphs.cycle(5)
    with pytest.raises(InvalidSpec):
        spectral.effective_resistance(g, 2, 2)
    with pytest.raises(InvalidSpec):
        spectral.hitting_time(g, 2, 2)


def test_cycle4_spectrum():
    assert np.allclose(spectral.laplacian_spectrum(graphs.cycle(4)), [0, 1, 1, 2])


@pytest.mark.parametrize("n", [5, 8, 11])
def test_cycle_closed_forms(n):
    g = graphs.cycle(n)
    res = spectral.resistance_matrix(g)
    h = spectral.hitting_time_matrix(g)
    for i in range(n):
        for j in range(n):
            assert res[i, j] == pytest.approx(oracles.cycle_resistance(n, i, j), abs=1e-10)
            assert h[i, j] == pytest.approx(oracles.cycle_hitting(n, i, j), abs=1e-8)


@pytest.mark.parametrize("g", [graphs.hypercube(3), graphs.torus(2, 3), graphs.random_regular(12, 3, 2)])
def test_against_iterative_and_dirichlet(g):
    h = spectral.hitting_time_matrix(g)
    ref = oracles.hitting_times_iterative(g.n, g.edges.tolist())
    assert np.allclose(h, ref, rtol=1e-8, atol=1e-8)
    res = spectral.resistance_matrix(g)
    for u, v in [(0, 1), (0, g.n - 1), (1, g.n // 2)]:
        assert res[u, v] == pytest.approx(oracles.dirichlet_resistance(g.n, g.edges.tolist(), u, v),
                                          rel=1e-6)


@pytest.mark.parametrize("g", [graphs.cycle(10), graphs.torus(2, 4), graphs.hypercube(5),
                               graphs.random_regular(40, 3, 5), graphs.complete(7)])
def test_hitting_time_routes_agree(g):
    assert np.allclose(spectral.hitting_time_matrix(g, "solve"),
                       spectral.hitting_time_matrix(g, "pinv"), rtol=1e-10, atol=1e-9)


def test_unknown_hitting_method():
    with pytest.raises(InvalidSpec):
        spectral.hitting_time_matrix(graphs.cycle(5), "walk")


def test_hypercube_T_is_logarithmic():
    vals = []
    for r in range(3, 9):
        a = spectral.analyze(graphs.hypercube(r))
        vals.append(a.T_of_G / math.log(2**r))
    assert max(vals) / min(vals) <= 2.0


def test_cycle_T_is_linear():
    ns = np.array([16, 32, 64, 128])
    ts = [spectral.analyze(graphs.cycle(int(n))).T_of_G for n in ns]
    slope = np.polyfit(np.log(ns), np.log(ts), 1)[0]
    assert abs(slope - 1.0) <= 0.15


@pytest.mark.parametrize("k", [3, 4, 5, 6])
def test_torus_edge_hitting_time_is_n_minus_one(k):
    a = spectral.analyze(graphs.torus(2, k))
    assert a.t_even == pytest.approx(a.n - 1, abs=1e-6)


def test_balancing_time_scale_is_min():
    assert spectral.balancing_time_scale(4, 2, 1.0, 4.0) == pytest.approx(1.0)
    assert spectral.balancing_time_scale(100, 3, 0.01, 500.0) == pytest.approx(math.sqrt(300))
    assert spectral.balancing_time_scale(100, 30, 0.01, 300.0) == pytest.approx(3 * math.log(100))


def test_analyze_keys():
    d = spectral.analyze(graphs.cycle(6)).to_dict()
    assert list(d) == ["lambda_gap", "res_diam", "res_star", "t_hit", "t_even", "T_of_G", "n", "d"]


@pytest.mark.parametrize("g", [graphs.cycle(9), graphs.torus(2, 5), graphs.hypercube(4),
                               graphs.complete(6)])
def test_neighbour_hitting_both_directions_on_transitive_graphs(g):
    h = spectral.hitting_time_matrix(g)
    target = 2 * g.num_edges / g.d - 1
    for i in range(g.n):
        assert h[i, g.neighbors[i]].mean() == pytest.approx(target, rel=1e-8)
        assert h[g.neighbors[i], i].mean() == pytest.approx(target, rel=1e-8)
