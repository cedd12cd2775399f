import math

import numpy as np
import pytest

from matchbal import bounds as B
from matchbal import graphs
from matchbal.errors import InvalidSpec
from matchbal.matchings import build_circuit
from matchbal.metrics import global_divergence
from matchbal.process import ReplayLog
from matchbal.spectral import analyze

import oracles

C4 = graphs.cycle(4)
A4 = analyze(C4)


def test_sync_bound_cycle4_plugin():
    w, b = B.sync_bound(C4, A4, B.BoundParams(m=4))
    rw, rb = oracles.sync_bound_plugin(4, 2, 1.0, 3.0, 1.0, 4)
    assert (w, b) == pytest.approx((rw, rb), rel=1e-12)
    assert w == pytest.approx(1.386, abs=1e-3) and b == pytest.approx(3.76, abs=5e-3)


def test_sync_bound_structure():
    w0, b0 = B.sync_bound(C4, A4, B.BoundParams(m=0))
    assert b0 == pytest.approx(math.log(4))
    w2, _ = B.sync_bound(C4, A4, B.BoundParams(m=0, K=2))
    assert w2 - w0 == pytest.approx(math.log(2) / A4.lambda_gap)


def test_async_cycle4_plugin():
    w, b = B.async_bound(C4, A4, B.BoundParams())
    rw, rb = oracles.async_bound_plugin(4, 2, 1.0, 3.0, 1.0)
    assert (w, b) == pytest.approx((rw, rb), rel=1e-12)
    assert w == pytest.approx(5.545, abs=1e-3) and b == pytest.approx(2.378, abs=1e-3)


def test_async_structure():
    g = graphs.torus(2, 6)
    a = analyze(g)
    p1, ph = B.BoundParams(beta=1.0), B.BoundParams(beta=0.5)
    ln = math.log(g.n)
    first = ln * math.sqrt(a.t_even / g.n)
    assert (B.async_bound(g, a, ph)[1] - first) == pytest.approx(
        math.sqrt(2) * (B.async_bound(g, a, p1)[1] - first))
    assert B.async_bound(g, a, p1)[0] == pytest.approx(g.n * B.sync_bound(g, a, p1)[0])


def test_g_values():
    assert B.g_of(C4, A4, "RM", 0.0) == 0.0
    assert B.g_of(C4, A4, "RM", 0.75) == pytest.approx(0.046875)
    assert B.g_of(C4, A4, "SE", 0.75) == pytest.approx(0.1875)
    assert B.g_of(C4, A4, "RM", 0.75) == pytest.approx(
        oracles.g_plugin(1 / 32, 2, 1.0, 1.0, 0.75))


@pytest.mark.parametrize("g", [graphs.cycle(12), graphs.torus(2, 5), graphs.hypercube(4),
                               graphs.random_regular(30, 3, 2), graphs.complete(6)])
def test_g_increasing_and_sigma(g):
    a = analyze(g)
    xs = np.linspace(0, 1, 1000)
    for model in ("RM", "SE"):
        vals = B.g_of(g, a, model, xs)
        assert np.all(np.diff(vals) > 0)
        assert B.sigma_sq(g, a, model) > 1


@pytest.mark.parametrize("g", [graphs.cycle(4), graphs.cycle(30), graphs.torus(2, 6),
                               graphs.hypercube(5), graphs.complete(8),
                               graphs.random_regular(40, 4, 3)])
def test_integral_quadrature_vs_closed_form(g):
    a = analyze(g)
    for model in ("RM", "SE"):
        q = B.integral_x_over_g(g, a, model, check=False)
        c = B.integral_x_over_g_closed(g, a, model)
        assert q == pytest.approx(c, rel=1e-9)
        # direct midpoint sum as a third route
        xs = (np.arange(200_000) + 0.5) / 200_000
        ref = np.mean(xs / B.g_of(g, a, model, xs))
        assert q == pytest.approx(ref, rel=1e-4)


@pytest.mark.parametrize("family", [
    [graphs.cycle(n) for n in (32, 64, 128, 256)],
    [graphs.torus(2, k) for k in (4, 8, 16)],
    [graphs.torus(3, k) for k in (3, 4, 6)],
    [graphs.hypercube(r) for r in (3, 5, 7, 9)],
    [graphs.random_regular(n, 3, 1) for n in (16, 64, 256)],
])
def test_integral_tracks_balancing_time_scale(family):
    ratios = []
    for g in family:
        a = analyze(g)
        ratios.append(B.integral_x_over_g(g, a, "RM") / (16 * g.d) / a.T_of_G)
    assert max(ratios) <= 2 * ratios[0]


def test_round_matrix_hypercube():
    g = graphs.hypercube(3)
    c = build_circuit(g)
    r = B.round_matrix(c)
    assert np.allclose(r, 1 / 8)
    assert B.round_matrix_gap(c) == pytest.approx(1.0)


def test_round_matrix_matches_product_oracle():
    g = graphs.cycle(10)
    c = build_circuit(g)
    prod = np.eye(10)
    for m in c.matchings:
        prod = oracles.matching_matrix(10, m.pairs.tolist()) @ prod
    assert np.allclose(B.round_matrix(c), prod)
    s = np.linalg.svd(prod - 0.1, compute_uv=False)
    assert B.round_matrix_gap(c) == pytest.approx(1 - s[0], abs=1e-12)


def test_cycle_divergence_linear_in_n():
    vals = {}
    for n in (16, 32, 64):
        g = graphs.cycle(n)
        vals[n] = global_divergence(ReplayLog.for_circuit(build_circuit(g), n * n), g).max_value**2
    c = vals[16] / 16
    assert vals[64] <= 2 * c * 64
    assert vals[64] >= 0.5 * c * 64


def test_circuit_lower_threshold():
    params = B.BoundParams(m=10)
    out = B.circuit_lower(params, 2.0, 64)
    assert not out["applicable"] and "disc_lower" not in out
    ok = B.circuit_lower(B.BoundParams(m=1000), 2.0, 64)
    assert ok["applicable"] and ok["disc_lower"] == pytest.approx(0.1 * math.sqrt(1000 / 64) * 2)


def test_circuit_bound_values():
    g = graphs.hypercube(4)
    c = build_circuit(g)
    w, b = B.circuit_bound(g, c, 1.5, B.BoundParams(m=16))
    assert w == pytest.approx(4 * math.log(16))
    assert b == pytest.approx(math.log(16) + 1.5 * math.sqrt(math.log(16)))


def test_class_divergence_values():
    assert B.class_divergence_sq(graphs.cycle(20)) == 20
    assert B.class_divergence_sq(graphs.torus(2, 4)) == pytest.approx(math.log(16))
    assert B.class_divergence_sq(graphs.torus(3, 4)) == 3
    assert B.class_divergence_sq(graphs.hypercube(5)) == pytest.approx(math.log(32))
    g = graphs.complete(6)
    c = build_circuit(g)
    assert B.class_divergence_sq(g, c) == pytest.approx(c.period / B.round_matrix_gap(c))
    assert B.class_divergence_sq(g) is None


def test_rounding_bound():
    assert B.rounding_bound(64) == pytest.approx(2 * math.sqrt(2 * math.log(64)))
    assert B.rounding_bound(64, beta=0.25) == pytest.approx(2 * B.rounding_bound(64))


@pytest.mark.parametrize("kw", [{"gamma": 1.0}, {"beta": 0}, {"m": -2}])
def test_bad_params(kw):
    with pytest.raises(InvalidSpec):
        B.BoundParams(**kw)
