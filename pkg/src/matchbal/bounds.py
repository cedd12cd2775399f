"""Numeric right-hand sides of the discrepancy bounds and their ingredients.

All hidden constants are set to ``constant_c`` (default 1); the values are
meant for scaling comparisons, not as absolute guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidSpec, QuadratureFailure
from .graphs import Graph
from .matchings import Circuit, matching_matrix
from .spectral import GraphAnalytics

__all__ = [
    "BoundParams",
    "sync_bound",
    "circuit_bound",
    "circuit_lower",
    "async_bound",
    "g_of",
    "sigma_sq",
    "integral_x_over_g",
    "integral_x_over_g_closed",
    "round_matrix",
    "round_matrix_gap",
    "class_divergence_sq",
    "rounding_bound",
]


@dataclass(frozen=True)
class BoundParams:
    gamma: float = 2.0
    K: float = 1.0
    m: int = 1
    beta: float = 1.0
    constant_c: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma <= 1:
            raise InvalidSpec("gamma must exceed 1")
        if not 0 < self.beta <= 1:
            raise InvalidSpec("beta must lie in (0, 1]")
        if self.m < 0:
            raise InvalidSpec("m must be non-negative")

    @property
    def K_eff(self) -> float:
        return max(float(self.K), 1.0)


def sync_bound(g: Graph, a: GraphAnalytics, params: BoundParams) -> tuple[float, float]:
    """(warmup, discrepancy bound) for the synchronous random-matching process."""
    n, c, b = g.n, params.constant_c, params.beta
    ln = math.log(n)
    load = params.m / n
    warmup = c * math.log(params.K_eff * n) / (a.lambda_gap * b)
    bound = c * (ln * (1 + math.sqrt(load * a.t_even / n)) + math.sqrt(ln / b * load * a.T_of_G))
    return warmup, bound


def async_bound(g: Graph, a: GraphAnalytics, params: BoundParams) -> tuple[float, float]:
    """(warmup, discrepancy bound) for the asynchronous single-edge process."""
    n, c, b = g.n, params.constant_c, params.beta
    ln = math.log(n)
    warmup = c * n * math.log(params.K_eff * n) / (a.lambda_gap * b)
    bound = c * (ln * math.sqrt(a.t_even / n) + math.sqrt(ln / b * a.T_of_G))
    return warmup, bound


def round_matrix(circuit: Circuit, n: int | None = None) -> np.ndarray:
    """Product of one period's matching matrices, last matching leftmost."""
    n = circuit.n if n is None else n
    r = np.eye(n)
    for m in circuit.matchings:
        r = matching_matrix(n, m) @ r
    return r


def round_matrix_gap(circuit: Circuit, n: int | None = None) -> float:
    """1 - largest singular value of the round matrix on the complement of 1."""
    r = round_matrix(circuit, n)
    n = r.shape[0]
    q = np.eye(n) - np.full((n, n), 1.0 / n)
    s = np.linalg.svd(q @ r @ q, compute_uv=False)
    return float(1.0 - s[0])


def circuit_bound(g: Graph, circuit: Circuit, divergence: float, params: BoundParams,
                  lambda_round: float | None = None) -> tuple[float, float]:
    lam_r = round_matrix_gap(circuit, g.n) if lambda_round is None else lambda_round
    n, c = g.n, params.constant_c
    ln = math.log(n)
    warmup = c * circuit.period / lam_r * math.log(params.K_eff * n)
    bound = c * (ln + math.sqrt(params.m / n) * divergence * math.sqrt(ln))
    return warmup, bound


def circuit_lower(params: BoundParams, divergence: float, n: int,
                  constant: float = 0.1) -> dict:
    """Lower-bound threshold for the circuit model.

    Returns ``{"applicable": False, ...}`` when m is below 4 n ln n / divergence.
    """
    m_min = 4 * n * math.log(n) / divergence
    out = {"m_threshold": m_min, "applicable": params.m >= m_min}
    if out["applicable"]:
        out["disc_lower"] = constant * math.sqrt(params.m / n) * divergence
    return out


def rounding_bound(n: int, gamma: float = 2.0, beta: float = 1.0) -> float:
    return 2.0 * math.sqrt(gamma * math.log(n) / beta)


def _prefactor(g: Graph, model: str) -> float:
    if model == "RM":
        return 1.0 / (16 * g.d)
    if model == "SE":
        return 1.0 / (g.d * g.n)
    raise InvalidSpec(f"unknown matching distribution {model!r}")


def g_of(g: Graph, a: GraphAnalytics, model: str, x):
    """g(x) = prefactor * max{d*lambda*x, x^2/Res, 4x^3/27}; vectorized in x."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa < 0):
        raise InvalidSpec("potential values are non-negative")
    val = _prefactor(g, model) * np.maximum.reduce(
        [g.d * a.lambda_gap * xa, xa**2 / a.res_diam, 4.0 * xa**3 / 27.0])
    return float(val) if np.ndim(x) == 0 else val


def sigma_sq(g: Graph, a: GraphAnalytics, model: str) -> float:
    if model == "RM":
        return 32.0 * a.t_even / g.n + 5.0
    if model == "SE":
        return 2.0 * a.t_even
    raise InvalidSpec(f"unknown matching distribution {model!r}")


def _breakpoints(g: Graph, a: GraphAnalytics) -> list[float]:
    """Where the max in g switches branch (within (0, 1))."""
    lin = g.d * a.lambda_gap
    pts = [lin * a.res_diam, 27.0 / (4.0 * a.res_diam), math.sqrt(27.0 * lin / 4.0)]
    return sorted(p for p in pts if 0.0 < p < 1.0)


def integral_x_over_g(g: Graph, a: GraphAnalytics, model: str, upper: float = 1.0,
                      check: bool = True) -> float:
    """Integral of x/g(x) over (0, upper] by adaptive quadrature.

    With ``check`` the closed-form antiderivative is evaluated too and a
    disagreement beyond 1e-8 relative raises QuadratureFailure.
    """
    def f(x: float) -> float:
        return x / g_of(g, a, model, x) if x > 0 else 1.0 / (_prefactor(g, model) * g.d * a.lambda_gap)

    pts = [p for p in _breakpoints(g, a) if p < upper]
    val, err = integrate.quad(f, 0.0, upper, points=pts or None, limit=200,
                              epsabs=0.0, epsrel=1e-12)
    if not math.isfinite(val) or err > 1e-8 * abs(val):
        raise QuadratureFailure(f"quadrature error {err:g} on value {val:g}")
    if check:
        ref = integral_x_over_g_closed(g, a, model, upper)
        if abs(ref - val) > 1e-8 * abs(ref):
            raise QuadratureFailure(f"quadrature {val!r} disagrees with closed form {ref!r}")
    return float(val)


def integral_x_over_g_closed(g: Graph, a: GraphAnalytics, model: str,
                             upper: float = 1.0) -> float:
    """Piecewise antiderivative of x/g = min{1/(d lam), Res/x, 27/(4x^2)} / prefactor."""
    lin = g.d * a.lambda_gap
    res = a.res_diam
    # integrand branches: c0 (constant), res/x, 27/(4 x^2); the active one is the minimum
    cuts = [0.0, *_breakpoints(g, a), upper]
    cuts = sorted({c for c in cuts if c <= upper})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        branch = int(np.argmin([1.0 / lin, res / mid, 27.0 / (4.0 * mid * mid)]))
        if branch == 0:
            total += (hi - lo) / lin
        elif branch == 1:
            total += res * math.log(hi / lo)
        else:
            total += 27.0 / 4.0 * (1.0 / lo - 1.0 / hi)
    return total / _prefactor(g, model)


def class_divergence_sq(g: Graph, circuit: Circuit | None = None,
                        lambda_round: float | None = None) -> float | None:
    """Squared global-divergence scale for the circuit model by graph class (unit constants).

    Generic fallback is period / lambda(R); known families use their tighter
    class value. Returns None when nothing applies.
    """
    fam = g.family
    if fam == "cycle" or (fam == "torus" and g.params.get("r") == 1):
        return float(g.n)
    if fam == "torus" and g.params.get("r") == 2:
        return math.log(g.n)
    if fam == "torus":
        return float(g.params["r"])
    if fam == "hypercube":
        return math.log(g.n)
    if circuit is not None:
        lam_r = round_matrix_gap(circuit, g.n) if lambda_round is None else lambda_round
        return circuit.period / lam_r
    return None
