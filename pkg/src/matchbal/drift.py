"""Empirical checks of a variable-drift tail bound for non-increasing chains.

A chain X(0) = x0 >= X(1) >= ... >= 0 with E[X(t+1) | X(t)=x] <= x - h(x) and
Var[X(t+1) | X(t)=x] <= sigma * (E[X(t+1) | x] - x)^2 should satisfy

* P[ F(X(t)) <= (1 - delta) t ] <= exp(-delta^2 t / (2 (sigma + 1)))
  with F(x) = integral from x to x0 of 1/h, and
* with probability >= 1 - p, the tail sum over t > t0 of X(t) is at most
  (1/(1-delta)) * integral from 0 to x0 of phi/h(phi),
  where t0 = 2(sigma+1)/delta^2 * (ln(1/p) + ln(2(sigma+1)/delta^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import _kernels as K
from .bounds import g_of, integral_x_over_g, sigma_sq
from .errors import InvalidSpec, QuadratureFailure, TruncationNotReached
from .graphs import Graph
from .matchings import rm_probability
from .spectral import GraphAnalytics, analyze

__all__ = [
    "DriftFunction",
    "NoiseModel",
    "DriftChainSpec",
    "DriftReport",
    "t0_of",
    "statement1_bound",
    "verify_conditions",
    "verify_statement1",
    "verify_statement2",
    "verify_on_potential_chain",
    "PotentialChainReport",
]

TRUNCATION = 1e-12
HORIZON_CAP = 10_000_000


def _quad(fun: Callable[[float], float], lo: float, hi: float, points=None) -> float:
    if hi <= lo:
        return 0.0
    pts = [p for p in (points or []) if lo < p < hi] or None
    val, err = integrate.quad(fun, lo, hi, points=pts, limit=400, epsabs=0.0, epsrel=1e-12)
    if not math.isfinite(val) or err > 1e-9 * max(abs(val), 1e-300):
        raise QuadratureFailure(f"quadrature error {err:g} for value {val:g}")
    return float(val)


@dataclass(frozen=True)
class DriftFunction:
    """Drift h on (0, x0]: linear a*x, power a*x**p, or tabulated (piecewise linear).

    Tabulated tables extend linearly to 0 below their first abscissa.
    """

    kind: str = "linear"
    a: float = 1.0
    p: float = 1.0
    xs: tuple[float, ...] = ()
    hs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "power", "tabulated"):
            raise InvalidSpec(f"unknown drift kind {self.kind!r}")
        if self.a <= 0:
            raise InvalidSpec("drift scale must be positive")
        if self.kind == "tabulated":
            xs, hs = np.asarray(self.xs, float), np.asarray(self.hs, float)
            if xs.size < 2 or xs.shape != hs.shape or np.any(np.diff(xs) <= 0) or xs[0] <= 0:
                raise InvalidSpec("tabulated drift needs increasing positive abscissae")
            if np.any(hs <= 0) or np.any(np.diff(hs) < 0):
                raise InvalidSpec("tabulated drift values must be positive and non-decreasing")

    @classmethod
    def from_dict(cls, data: dict) -> "DriftFunction":
        data = dict(data)
        for key in ("xs", "hs"):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        return cls(**data)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            out = self.a * x
        elif self.kind == "power":
            out = self.a * x**self.p
        else:
            xs, hs = np.asarray(self.xs), np.asarray(self.hs)
            out = np.where(x < xs[0], hs[0] * x / xs[0], np.interp(x, xs, hs))
        return float(out) if out.ndim == 0 else out

    @property
    def breakpoints(self) -> list[float]:
        return list(self.xs) if self.kind == "tabulated" else []

    @property
    def diverges_at_zero(self) -> bool:
        """True when the integral of 1/h near 0 is infinite."""
        return self.kind == "tabulated" or self.kind == "linear" or self.p >= 1

    def min_linear_rate(self, x0: float) -> float:
        """inf over (0, x0] of h(x)/x, used to certify tail-sum convergence."""
        if self.kind == "linear":
            return self.a
        if self.kind == "power":
            if self.p > 1:
                return 0.0
            return self.a * x0 ** (self.p - 1)
        grid = np.concatenate([np.geomspace(min(self.xs[0], x0) * 1e-3, x0, 256), np.array(self.xs)])
        grid = grid[grid <= x0]
        return float(np.min(self(grid) / grid))


def inverse_drift_integral(h, x: float, x0: float) -> float:
    """F(x) = integral over [x, x0] of 1/h, by quadrature in log coordinates."""
    if x >= x0:
        return 0.0
    if x <= 0.0:
        if getattr(h, "diverges_at_zero", True):
            return math.inf
        return _quad(lambda u: 1.0 / float(h(u)), 0.0, x0, h.breakpoints)
    pts = [math.log(b) for b in h.breakpoints if b > 0]
    return _quad(lambda u: math.exp(u) / float(h(math.exp(u))), math.log(x), math.log(x0), pts)


def phi_over_h_integral(h, x0: float) -> float:
    """Integral over (0, x0] of phi/h(phi); infinite for power drifts with exponent >= 2."""
    if getattr(h, "kind", None) == "power" and h.p >= 2:
        return math.inf
    # Gauss-Kronrod nodes are interior, so the integrand is never evaluated at 0
    return _quad(lambda u: u / float(h(u)), 0.0, x0, h.breakpoints)


def closed_inverse_integral(h: DriftFunction, x: float, x0: float) -> float | None:
    if h.kind == "linear":
        return math.inf if x <= 0 else math.log(x0 / x) / h.a
    if h.kind == "power":
        if h.p == 1:
            return math.inf if x <= 0 else math.log(x0 / x) / h.a
        if x <= 0 and h.p > 1:
            return math.inf
        return (x0 ** (1 - h.p) - x ** (1 - h.p)) / (h.a * (1 - h.p))
    return None


def closed_phi_integral(h: DriftFunction, x0: float) -> float | None:
    if h.kind == "linear":
        return x0 / h.a
    if h.kind == "power" and h.p < 2:
        return x0 ** (2 - h.p) / (h.a * (2 - h.p))
    return None


@dataclass(frozen=True)
class NoiseModel:
    """Transition law: 'deterministic' X' = X - h(X); 'multiplicative' X' = X * B."""

    kind: str = "deterministic"
    factors: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("deterministic", "multiplicative"):
            raise InvalidSpec(f"unknown noise model {self.kind!r}")
        if self.kind == "multiplicative":
            f = np.asarray(self.factors, float)
            if f.size == 0 or np.any(f < 0) or np.any(f > 1):
                raise InvalidSpec("multiplicative factors must lie in [0, 1]")
            if self.probs:
                pr = np.asarray(self.probs, float)
                if pr.shape != f.shape or abs(pr.sum() - 1) > 1e-12 or np.any(pr < 0):
                    raise InvalidSpec("factor probabilities must match and sum to 1")

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        data = dict(data)
        for key in ("factors", "probs"):
            if key in data:
                data[key] = tuple(float(v) for v in data[key])
        return cls(**data)

    @property
    def weights(self) -> np.ndarray:
        f = np.asarray(self.factors, float)
        return np.asarray(self.probs, float) if self.probs else np.full(f.size, 1.0 / f.size)

    def step(self, x: np.ndarray, h: DriftFunction, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "deterministic":
            return np.maximum(x - h(x), 0.0)
        idx = rng.choice(len(self.factors), size=x.shape[0], p=self.weights)
        return x * np.asarray(self.factors)[idx]

    def moments(self, x: float, h: DriftFunction) -> tuple[float, float]:
        """Exact conditional mean and variance of the next state from x."""
        if self.kind == "deterministic":
            return max(x - float(h(x)), 0.0), 0.0
        f, w = np.asarray(self.factors), self.weights
        mb = float(f @ w)
        vb = float(((f - mb) ** 2) @ w)
        return x * mb, x * x * vb


@dataclass(frozen=True)
class DriftChainSpec:
    x0: float
    h: DriftFunction
    sigma: float
    noise: NoiseModel = NoiseModel()
    delta: float = 0.5
    p_target: float = 0.01

    def __post_init__(self) -> None:
        if self.x0 <= 0:
            raise InvalidSpec("x0 must be positive")
        if not 0 < self.delta < 1:
            raise InvalidSpec("delta must lie in (0, 1)")
        if not 0 < self.p_target < 1:
            raise InvalidSpec("p must lie in (0, 1)")
        if self.sigma < 0:
            raise InvalidSpec("sigma must be non-negative")
        grid = np.geomspace(self.x0 * 1e-9, self.x0, 64)
        vals = self.h(grid)
        if np.any(vals <= 0) or np.any(np.diff(vals) < -1e-15 * np.abs(vals[1:])):
            raise InvalidSpec("h must be positive and increasing on (0, x0]")
        for x in grid:
            mean, var = self.noise.moments(float(x), self.h)
            if mean > x - float(self.h(x)) + 1e-12 * x:
                raise InvalidSpec(f"noise model violates the drift condition at x={x:g}")
            if var > self.sigma * (mean - x) ** 2 * (1 + 1e-12) + 1e-300:
                raise InvalidSpec(f"noise model violates the variance condition at x={x:g}")

    @classmethod
    def from_dict(cls, data: dict) -> "DriftChainSpec":
        return cls(
            x0=float(data["x0"]),
            h=DriftFunction.from_dict(data["h"]),
            sigma=float(data["sigma"]),
            noise=NoiseModel.from_dict(data.get("noise", {})),
            delta=float(data.get("delta", 0.5)),
            p_target=float(data.get("p_target", 0.01)),
        )

    @property
    def t0(self) -> float:
        return t0_of(self.sigma, self.delta, self.p_target)

    def F(self, x: float) -> float:
        return inverse_drift_integral(self.h, x, self.x0)

    def tail_bound(self) -> float:
        return phi_over_h_integral(self.h, self.x0) / (1 - self.delta)


@dataclass
class DriftReport:
    statement: int
    runs: int
    rate: float
    bound: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"statement": self.statement, "runs": self.runs, "rate": self.rate,
                "bound": self.bound, "tolerance": self.tolerance, "passed": self.passed,
                **{k: v for k, v in self.details.items() if np.isscalar(v)}}


def t0_of(sigma: float, delta: float, p: float) -> float:
    c = 2 * (sigma + 1) / delta**2
    return c * (-math.log(p) + math.log(c))


def statement1_bound(sigma: float, delta: float, t: int) -> float:
    return math.exp(-(delta**2) * t / (2 * (sigma + 1)))


def _binomial_tol(p: float, runs: int, z: float = 3.0) -> float:
    return z * math.sqrt(max(p * (1 - p), 0.0) / runs)


def verify_conditions(spec: DriftChainSpec, rng: np.random.Generator, buckets: int = 16,
                      samples: int = 20_000, z: float = 3.0) -> bool:
    """Monte Carlo re-check of both chain conditions at log-spaced states."""
    for x in np.geomspace(spec.x0 * 1e-6, spec.x0, buckets):
        nxt = spec.noise.step(np.full(samples, x), spec.h, rng)
        mean = nxt.mean()
        var = nxt.var()
        se = nxt.std() / math.sqrt(samples)
        c = nxt - mean
        se_var = math.sqrt(max((c**4).mean() - var**2, 0.0) / samples)
        if mean - z * se > x - float(spec.h(x)) + 1e-12 * x:
            return False
        if var - z * se_var > spec.sigma * (x - mean + z * se) ** 2 * (1 + 1e-12) + 1e-24 * x * x:
            return False
    return True


def _F_many(F: Callable[[float], float], xs: np.ndarray) -> np.ndarray:
    uniq, inv = np.unique(xs, return_inverse=True)
    vals = np.array([F(float(u)) for u in uniq])
    return vals[inv]


def verify_statement1(spec: DriftChainSpec, runs: int, t: int,
                      rng: np.random.Generator | None = None, z: float = 3.0,
                      check_conditions: bool = True) -> DriftReport:
    rng = np.random.default_rng(0) if rng is None else rng
    if check_conditions and not verify_conditions(spec, rng):
        raise InvalidSpec("chain failed the empirical drift/variance re-check")
    x = np.full(runs, float(spec.x0))
    for _ in range(t):
        x = spec.noise.step(x, spec.h, rng)
    fv = _F_many(spec.F, x)
    hits = fv <= (1 - spec.delta) * t
    rate = float(hits.mean())
    bound = statement1_bound(spec.sigma, spec.delta, t)
    tol = _binomial_tol(bound, runs, z)
    return DriftReport(1, runs, rate, bound, tol, rate <= bound + tol,
                       {"t": t, "min_F": float(fv.min()), "threshold": (1 - spec.delta) * t})


def verify_statement2(spec: DriftChainSpec, runs: int, rng: np.random.Generator | None = None,
                      z: float = 3.0, cap: int = HORIZON_CAP,
                      check_conditions: bool = True) -> DriftReport:
    rng = np.random.default_rng(0) if rng is None else rng
    if check_conditions and not verify_conditions(spec, rng):
        raise InvalidSpec("chain failed the empirical drift/variance re-check")
    if spec.h.min_linear_rate(spec.x0) <= 0:
        raise InvalidSpec("tail sum needs h(x) >= eps * x")
    start = math.floor(spec.t0) + 1
    x = np.full(runs, float(spec.x0))
    tail = np.zeros(runs)
    stop = TRUNCATION * spec.x0
    t = 0
    while np.any(x >= stop):
        if t >= cap:
            raise TruncationNotReached(f"chain still above {stop:g} after {cap} steps")
        x = spec.noise.step(x, spec.h, rng)
        t += 1
        if t >= start:
            tail += x
    bound = spec.tail_bound()
    bad = tail > bound
    rate = float(bad.mean())
    tol = _binomial_tol(spec.p_target, runs, z)
    return DriftReport(2, runs, rate, spec.p_target, tol, rate <= spec.p_target + tol,
                       {"t0": spec.t0, "tail_bound": bound, "max_tail": float(tail.max()),
                        "median_tail": float(np.median(tail)), "steps": t})


class GoodnessDrift:
    """h(x) = beta * g(x) for a matching distribution's goodness function."""

    def __init__(self, g: Graph, a: GraphAnalytics, model: str, beta: float):
        self.g, self.a, self.model, self.beta = g, a, model, beta
        lin = g.d * a.lambda_gap
        pts = [lin * a.res_diam, 27.0 / (4.0 * a.res_diam), math.sqrt(27.0 * lin / 4.0)]
        self.breakpoints = sorted(p for p in pts if 0 < p < 1)
        self.diverges_at_zero = True

    def __call__(self, x):
        return self.beta * g_of(self.g, self.a, self.model, x)


@dataclass
class PotentialChainReport:
    statement1: DriftReport
    statement2: DriftReport
    divergence: DriftReport
    sigma: float
    t0: float
    integral: float

    @property
    def passed(self) -> bool:
        return self.statement1.passed and self.statement2.passed and self.divergence.passed

    def to_dict(self) -> dict:
        return {"statement1": self.statement1.to_dict(), "statement2": self.statement2.to_dict(),
                "divergence": self.divergence.to_dict(), "sigma": self.sigma, "t0": self.t0,
                "integral": self.integral, "passed": self.passed}


def _potential_series(g: Graph, model: str, beta: float, k: int, rng: np.random.Generator,
                      p: float, cap: int, chunk: int = 4096) -> np.ndarray:
    """Phi after s i.i.d. matchings applied to e_k, s = 0.. until below truncation."""
    v = np.zeros(g.n)
    v[k] = 1.0
    x0 = 1.0 - 1.0 / g.n
    parts = []
    done = 0
    while True:
        out = np.empty(chunk + 1)
        if model == "RM":
            K.rm_potential_chain(g.edges, g.n, p, beta, v, chunk, rng, out)
        else:
            K.se_potential_chain(g.edges, g.n, beta, v, chunk, rng, out)
        parts.append(out if not parts else out[1:])
        done += chunk
        if out[-1] < TRUNCATION * x0:
            return np.concatenate(parts)
        if done >= cap:
            raise TruncationNotReached(f"potential chain above threshold after {cap} steps")


def verify_on_potential_chain(g: Graph, distribution: str = "RM", beta: float = 1.0,
                              runs: int = 1000, t: int = 200,
                              rng: np.random.Generator | None = None, gamma: float = 1.0,
                              delta: float = 0.5, k: int = 0,
                              analytics: GraphAnalytics | None = None, p: float | None = None,
                              z: float = 3.0, cap: int = HORIZON_CAP) -> PotentialChainReport:
    """Instantiate the chain X(s) = Phi(row after s backward matchings) and check both statements.

    h = beta * g and sigma = sigma_G^2 - 1: the ratio Var/drop^2 of one step is
    the same for every beta because each matching's drop scales by beta(2-beta).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    a = analyze(g) if analytics is None else analytics
    p = rm_probability(g.d) if p is None else p
    h = GoodnessDrift(g, a, distribution, beta)
    sig = sigma_sq(g, a, distribution) - 1.0
    p_target = g.n ** (-gamma)
    x0 = 1.0 - 1.0 / g.n
    t0 = t0_of(sig, delta, p_target)
    start = math.floor(t0) + 1
    integral = integral_x_over_g(g, a, distribution, upper=x0) / beta
    tail_bound = integral / (1 - delta)
    divergence_sq_bound = 2.0 * integral_x_over_g(g, a, distribution, upper=1.0) / beta + t0

    at_t = np.empty(runs)
    tails = np.empty(runs)
    totals = np.empty(runs)
    worst_increase = -math.inf
    for r in range(runs):
        s = _potential_series(g, distribution, beta, k, rng, p, cap)
        worst_increase = max(worst_increase, float(np.max(np.diff(s))))
        at_t[r] = s[t] if t < s.shape[0] else 0.0
        tails[r] = s[start:].sum()
        totals[r] = s[1:].sum()

    fv = np.array([inverse_drift_integral(h, float(xv), x0) for xv in at_t])
    rate1 = float(np.mean(fv <= (1 - delta) * t))
    b1 = statement1_bound(sig, delta, t)
    tol1 = _binomial_tol(b1, runs, z)
    rate2 = float(np.mean(tails > tail_bound))
    tol2 = _binomial_tol(p_target, runs, z)
    rate3 = float(np.mean(totals > divergence_sq_bound))
    s1 = DriftReport(1, runs, rate1, b1, tol1, rate1 <= b1 + tol1,
                     {"t": t, "min_F": float(fv.min()), "threshold": (1 - delta) * t})
    s2 = DriftReport(2, runs, rate2, p_target, tol2, rate2 <= p_target + tol2,
                     {"t0": t0, "tail_bound": tail_bound, "max_tail": float(tails.max())})
    s3 = DriftReport(0, runs, rate3, p_target, tol2, rate3 <= p_target + tol2,
                     {"divergence_sq_bound": divergence_sq_bound, "max_divergence_sq": float(totals.max()),
                      "median_divergence_sq": float(np.median(totals)),
                      "max_potential_increase": worst_increase})
    return PotentialChainReport(s1, s2, s3, sig, t0, integral)
