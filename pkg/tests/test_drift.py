import math

import numpy as np
import pytest

from matchbal import graphs
from matchbal.drift import (DriftChainSpec, DriftFunction, NoiseModel, closed_inverse_integral,
                            closed_phi_integral, inverse_drift_integral, phi_over_h_integral,
                            statement1_bound, t0_of, verify_conditions, verify_on_potential_chain,
                            verify_statement1, verify_statement2)
from matchbal.errors import InvalidSpec

HALF = DriftFunction("linear", a=0.5)
HALVING = DriftChainSpec(x0=1.0, h=HALF, sigma=0.5)
COIN = DriftChainSpec(x0=1.0, h=HALF, sigma=1.0,
                      noise=NoiseModel("multiplicative", (0.25, 0.75)))


def test_closed_forms():
    assert phi_over_h_integral(HALF, 3.0) == pytest.approx(6.0)
    assert closed_phi_integral(HALF, 3.0) == pytest.approx(6.0)
    # f(x) = 2 ln(x0 / x) for h = x / 2
    assert inverse_drift_integral(HALF, 0.125, 1.0) == pytest.approx(2 * math.log(8), rel=1e-10)
    assert inverse_drift_integral(HALF, 0.0, 1.0) == math.inf


@pytest.mark.parametrize("h", [DriftFunction("linear", a=0.3), DriftFunction("power", a=2.0, p=0.5),
                               DriftFunction("power", a=1.5, p=2.0)])
def test_quadrature_matches_closed_forms(h):
    for x in (1e-6, 0.01, 0.3, 0.9):
        q = inverse_drift_integral(h, x, 1.0)
        assert q == pytest.approx(closed_inverse_integral(h, x, 1.0), rel=1e-9)
    ref = closed_phi_integral(h, 1.0)
    if ref is None:
        assert phi_over_h_integral(h, 1.0) == math.inf
    else:
        assert phi_over_h_integral(h, 1.0) == pytest.approx(ref, rel=1e-9)


def test_tabulated_drift_quadrature():
    h = DriftFunction("tabulated", xs=(0.1, 0.5, 1.0), hs=(0.05, 0.3, 0.5))
    xs = np.linspace(1e-4, 1.0, 400_001)
    mid = 0.5 * (xs[1:] + xs[:-1])
    ref = np.sum(mid / h(mid) * np.diff(xs))
    assert phi_over_h_integral(h, 1.0) == pytest.approx(ref + 1e-4 * 2, rel=1e-5)


def test_t0_formula():
    c = 2 * 2 / 0.25
    assert t0_of(1.0, 0.5, 0.01) == pytest.approx(c * (math.log(100) + math.log(c)))


def test_halving_chain_statement1_exact():
    for t in (1, 5, 40):
        rep = verify_statement1(HALVING, 50, t, np.random.default_rng(0))
        assert rep.rate == 0.0 and rep.passed
        # f(X(t)) = 2 t ln 2 > (1 - delta) t
        assert rep.details["min_F"] == pytest.approx(2 * t * math.log(2), rel=1e-9)


def test_statement1_at_t_zero_boundary():
    rep = verify_statement1(HALVING, 20, 0, np.random.default_rng(0))
    assert rep.rate == 1.0 and rep.bound == 1.0 and rep.passed


def test_halving_chain_statement2():
    rep = verify_statement2(HALVING, 10, np.random.default_rng(0))
    t0 = HALVING.t0
    start = math.floor(t0) + 1
    assert rep.details["max_tail"] == pytest.approx(2.0 ** (-start) * 2, rel=1e-6)
    assert rep.passed and rep.rate == 0.0


def test_coin_chain_both_statements():
    rng = np.random.default_rng(1)
    s1 = verify_statement1(COIN, 20_000, int(COIN.t0 // 4), rng)
    s2 = verify_statement2(COIN, 20_000, rng)
    assert s1.passed and s2.passed
    assert s1.bound == pytest.approx(statement1_bound(1.0, 0.5, int(COIN.t0 // 4)))


def test_conditions_checked_empirically():
    assert verify_conditions(COIN, np.random.default_rng(2))
    assert verify_conditions(HALVING, np.random.default_rng(2))


def test_spec_rejects_violating_noise():
    with pytest.raises(InvalidSpec):
        DriftChainSpec(x0=1.0, h=HALF, sigma=0.2, noise=NoiseModel("multiplicative", (0.25, 0.75)))
    with pytest.raises(InvalidSpec):
        DriftChainSpec(x0=1.0, h=DriftFunction("linear", a=0.9), sigma=1.0,
                       noise=NoiseModel("multiplicative", (0.25, 0.75)))
    with pytest.raises(InvalidSpec):
        DriftChainSpec(x0=1.0, h=HALF, sigma=1.0, delta=1.0)


def test_spec_from_dict():
    spec = DriftChainSpec.from_dict({"x0": 2.0, "h": {"kind": "linear", "a": 0.5}, "sigma": 1.0,
                                     "noise": {"kind": "multiplicative", "factors": [0.25, 0.75]}})
    assert spec.noise.kind == "multiplicative" and spec.h.a == 0.5


def test_hypercube_se_chain_hits_zero():
    rep = verify_on_potential_chain(graphs.hypercube(3), "SE", runs=200, t=100,
                                    rng=np.random.default_rng(3))
    assert rep.statement1.rate == 0.0 and rep.passed


def test_cycle16_rm_chain():
    rep = verify_on_potential_chain(graphs.cycle(16), "RM", runs=300, t=300,
                                    rng=np.random.default_rng(4))
    assert rep.passed
    assert rep.divergence.details["max_potential_increase"] <= 1e-12


def test_integral_term_scales_inverse_beta():
    g = graphs.cycle(16)
    vals = {b: verify_on_potential_chain(g, "RM", beta=b, runs=20, t=50,
                                         rng=np.random.default_rng(5)).integral
            for b in (1.0, 0.5, 0.25)}
    betas = np.array([1.0, 0.5, 0.25])
    y = np.array([vals[b] for b in betas])
    slope = np.polyfit(np.log(betas), np.log(y), 1)[0]
    assert abs(slope + 1) <= 0.2
