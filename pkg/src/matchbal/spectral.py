"""Spectral gap, effective resistance and random-walk hitting times."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidSpec, NumericalFailure
from .graphs import Graph

__all__ = [
    "GraphAnalytics",
    "analyze",
    "normalized_laplacian_gap",
    "laplacian_spectrum",
    "laplacian_pinv",
    "resistance_matrix",
    "effective_resistance",
    "hitting_time_matrix",
    "hitting_time",
    "edge_hitting_time",
    "hitting_time_max",
    "balancing_time_scale",
]

ZERO_EIG = 1e-10


@dataclass(frozen=True)
class GraphAnalytics:
    lambda_gap: float
    res_diam: float
    res_star: float
    t_hit: float
    t_even: float
    T_of_G: float
    n: int
    d: int

    def to_dict(self) -> dict:
        return asdict(self)


def laplacian_spectrum(g: Graph) -> np.ndarray:
    """Ascending eigenvalues of the normalized Laplacian I - A/d."""
    lap = np.eye(g.n) - g.adjacency() / g.d
    try:
        return np.linalg.eigvalsh(lap)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc


def normalized_laplacian_gap(g: Graph) -> float:
    ev = laplacian_spectrum(g)
    nonzero = ev[ev > ZERO_EIG]
    if nonzero.size == 0 or np.sum(ev <= ZERO_EIG) != 1:
        raise NumericalFailure("graph appears disconnected (multiple zero eigenvalues)")
    return float(nonzero[0])


def laplacian_pinv(g: Graph) -> np.ndarray:
    try:
        return np.linalg.pinv(g.laplacian(), hermitian=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"pseudoinverse failed: {exc}") from exc


def resistance_matrix(g: Graph, lplus: np.ndarray | None = None) -> np.ndarray:
    """All-pairs effective resistance from the Laplacian pseudoinverse."""
    lp = laplacian_pinv(g) if lplus is None else lplus
    diag = np.diag(lp)
    res = diag[:, None] + diag[None, :] - 2.0 * lp
    res = 0.5 * (res + res.T)
    np.fill_diagonal(res, 0.0)
    return res


def effective_resistance(g: Graph, i: int, j: int) -> float:
    if i == j:
        raise InvalidSpec("effective resistance needs i != j")
    return float(resistance_matrix(g)[i, j])


def _hitting_column(p: np.ndarray, target: int) -> np.ndarray:
    n = p.shape[0]
    keep = np.arange(n) != target
    sub = np.eye(n - 1) - p[np.ix_(keep, keep)]
    try:
        h = np.linalg.solve(sub, np.ones(n - 1))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular hitting-time system for target {target}") from exc
    col = np.zeros(n)
    col[keep] = h
    return col


DIRECT_SOLVE_LIMIT = 256


def hitting_time_matrix(g: Graph, method: str = "auto", lplus: np.ndarray | None = None
                        ) -> np.ndarray:
    """H[i, j] = expected steps for a simple random walk from i to reach j.

    ``solve`` runs one linear system per target. ``pinv`` uses the regular-graph
    identity H[i, j] = n d (L+[j, j] - L+[i, j]) from the Laplacian pseudoinverse,
    which costs one factorisation instead of n. ``auto`` picks ``pinv`` above
    DIRECT_SOLVE_LIMIT nodes.
    """
    if method == "auto":
        method = "pinv" if g.n > DIRECT_SOLVE_LIMIT else "solve"
    if method == "solve":
        p = g.adjacency() / g.d
        return np.column_stack([_hitting_column(p, j) for j in range(g.n)])
    if method != "pinv":
        raise InvalidSpec(f"unknown hitting-time method {method!r}")
    if lplus is None:
        lplus = laplacian_pinv(g)
    h = g.n * g.d * (np.diag(lplus)[None, :] - lplus)
    np.fill_diagonal(h, 0.0)
    return h


def hitting_time(g: Graph, i: int, j: int) -> float:
    if i == j:
        raise InvalidSpec("hitting time needs i != j")
    return float(_hitting_column(g.adjacency() / g.d, j)[i])


def edge_hitting_time(g: Graph, h: np.ndarray | None = None) -> float:
    h = hitting_time_matrix(g) if h is None else h
    e = g.edges
    return float(max(h[e[:, 0], e[:, 1]].max(), h[e[:, 1], e[:, 0]].max()))


def hitting_time_max(g: Graph, h: np.ndarray | None = None) -> float:
    h = hitting_time_matrix(g) if h is None else h
    return float(h.max())


def balancing_time_scale(n: int, d: int, lambda_gap: float, t_hit: float) -> float:
    """min{t_hit/n * ln n, sqrt(d/lambda), 1/lambda}; natural logs throughout."""
    return min(t_hit / n * math.log(n), math.sqrt(d / lambda_gap), 1.0 / lambda_gap)


def analyze(g: Graph) -> GraphAnalytics:
    lam = normalized_laplacian_gap(g)
    lplus = laplacian_pinv(g)
    res = resistance_matrix(g, lplus)
    h = hitting_time_matrix(g, lplus=lplus)
    e = g.edges
    t_hit = hitting_time_max(g, h)
    return GraphAnalytics(
        lambda_gap=lam,
        res_diam=float(res.max()),
        res_star=float(res[e[:, 0], e[:, 1]].max()),
        t_hit=t_hit,
        t_even=edge_hitting_time(g, h),
        T_of_G=balancing_time_scale(g.n, g.d, lam, t_hit),
        n=g.n,
        d=g.d,
    )
