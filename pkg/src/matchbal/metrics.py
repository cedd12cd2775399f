"""Discrepancy, quadratic potentials, global divergence and goodness checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .bounds import g_of, sigma_sq
from .errors import InvalidSpec, LogTooShort
from .graphs import Graph
from .matchings import Matching, rm_probability, sample_matching_indicators
from .process import ReplayLog
from .spectral import GraphAnalytics, analyze

__all__ = [
    "discrepancy",
    "node_potential",
    "edge_potential",
    "DivergenceResult",
    "global_divergence",
    "divergence_nodes",
    "GoodnessReport",
    "goodness_check",
    "probe_vectors",
]


def discrepancy(x) -> float:
    x = np.asarray(x)
    return float(x.max() - x.min())


def node_potential(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum((x - x.mean()) ** 2))


def edge_potential(x, edges) -> float:
    """Sum of squared differences over an edge set (array, Matching or Graph)."""
    if isinstance(edges, Matching):
        edges = edges.pairs
    elif isinstance(edges, Graph):
        edges = edges.edges
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum((x[e[:, 0]] - x[e[:, 1]]) ** 2))


@dataclass
class DivergenceResult:
    nodes: np.ndarray
    per_node: np.ndarray
    max_value: float
    t: int
    sampled: bool = False
    row_potentials: np.ndarray | None = None
    max_increase: float = 0.0

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "max_value": self.max_value,
            "max_value_sq": self.max_value**2,
            "sampled": self.sampled,
            "nodes": self.nodes.tolist(),
            "per_node": self.per_node.tolist(),
            "max_potential_increase": self.max_increase,
        }


def divergence_nodes(n: int, deviation: np.ndarray | None = None,
                     rng: np.random.Generator | None = None, limit: int = 256,
                     sample: int = 16) -> tuple[np.ndarray, bool]:
    """All nodes when n <= limit, else a random sample plus the argmax-deviation node."""
    if n <= limit:
        return np.arange(n), False
    rng = np.random.default_rng(0) if rng is None else rng
    picks = set(rng.choice(n, size=sample, replace=False).tolist())
    if deviation is not None:
        picks.add(int(np.argmax(np.abs(deviation))))
    return np.array(sorted(picks)), True


def global_divergence(log: ReplayLog, g: Graph, beta: float | None = None,
                      k: int | Sequence[int] | None = None, t: int | None = None,
                      keep_series: bool = False) -> DivergenceResult:
    """Global divergence over logged steps 1..t via the backward row recursion.

    Row k of the suffix product M[tau, t] is obtained from e_k by applying the
    matchings of steps t, t-1, ..., tau (the matrices are symmetric). The sum
    runs over tau = 1..t; the untouched e_k is only kept in the series.
    """
    beta = log.beta if beta is None else beta
    t = len(log) if t is None else t
    if t > len(log):
        raise LogTooShort(f"log covers {len(log)} steps, {t} requested")
    if t < 0:
        raise InvalidSpec("t must be non-negative")
    sampled = False
    if k is None:
        nodes, sampled = divergence_nodes(g.n)
    else:
        nodes = np.atleast_1d(np.asarray(k, dtype=np.int64))
    v = np.zeros((g.n, nodes.shape[0]))
    v[nodes, np.arange(nodes.shape[0])] = 1.0
    sums = np.zeros(nodes.shape[0])
    series = np.zeros((t + 1, nodes.shape[0]) if keep_series else (1, 1))
    ptr = log.step_ptr[: t + 1]
    worst = K.backward_divergence(ptr, log.pairs, float(beta), v, sums, keep_series, series)
    per = np.sqrt(sums)
    return DivergenceResult(
        nodes=nodes,
        per_node=per,
        max_value=float(per.max()) if per.size else 0.0,
        t=t,
        sampled=sampled,
        row_potentials=series if keep_series else None,
        max_increase=float(worst) if t else 0.0,
    )


@dataclass
class GoodnessReport:
    distribution: str
    samples: int
    draws: int
    exact: bool
    sigma_sq: float
    min_slack_drop: float
    max_var_ratio: float
    drop_pass: bool
    var_pass: bool
    worst_drop_vector: int = -1
    worst_var_vector: int = -1
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> dict[str, str]:
        return {"drop": "pass" if self.drop_pass else "fail",
                "variance": "pass" if self.var_pass else "fail"}

    @property
    def passed(self) -> bool:
        return self.drop_pass and self.var_pass

    def to_dict(self) -> dict:
        return {
            "distribution": self.distribution,
            "samples": self.samples,
            "draws": self.draws,
            "exact": self.exact,
            "sigma_sq": self.sigma_sq,
            "min_slack_drop": self.min_slack_drop,
            "max_var_ratio": self.max_var_ratio,
            "verdict": self.verdict,
        }


def probe_vectors(n: int, rng: np.random.Generator, dirichlet: int) -> np.ndarray:
    """Columns: all basis vectors, then Dirichlet(1,...,1) draws (all stochastic)."""
    basis = np.eye(n)
    if dirichlet <= 0:
        return basis
    return np.hstack([basis, rng.dirichlet(np.ones(n), size=dirichlet).T])


def goodness_check(g: Graph, distribution: str, sample_count: int = 100_000,
                   rng: np.random.Generator | None = None,
                   analytics: GraphAnalytics | None = None, dirichlet: int | None = None,
                   p: float | None = None, vectors: np.ndarray | None = None,
                   block: int = 16, z: float = 3.0) -> GoodnessReport:
    """Check both goodness conditions for random matchings ("RM") or single edges ("SE").

    SE is enumerated exactly over the |E| equally likely edges; RM uses
    ``sample_count`` Monte Carlo matchings shared by all test vectors and a
    ``z`` standard-error tolerance.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    a = analyze(g) if analytics is None else analytics
    if distribution not in ("RM", "SE"):
        raise InvalidSpec(f"unknown distribution {distribution!r}")
    dirichlet = 2 * g.n if dirichlet is None else dirichlet
    xs = probe_vectors(g.n, rng, dirichlet) if vectors is None else np.asarray(vectors, float)
    s2 = sigma_sq(g, a, distribution)
    e = g.edges
    # squared difference of every test vector across every edge: (|E|, V)
    w = (xs[e[:, 0]] - xs[e[:, 1]]) ** 2
    phi = np.sum((xs - xs.mean(axis=0)) ** 2, axis=0)
    exact = distribution == "SE"
    if exact:
        drops = 0.5 * w  # one outcome per edge, each with probability 1/|E|
        mean = drops.mean(axis=0)
        var = drops.var(axis=0)
        se_mean = np.zeros_like(mean)
        se_var = np.zeros_like(var)
        draws = g.num_edges
    else:
        ind = sample_matching_indicators(g, rng, sample_count, p).astype(np.float64)
        mean = np.empty(xs.shape[1])
        var = np.empty(xs.shape[1])
        m4 = np.empty(xs.shape[1])
        for lo in range(0, xs.shape[1], block):
            dr = 0.5 * (ind @ w[:, lo:lo + block])
            mu = dr.mean(axis=0)
            c = dr - mu
            mean[lo:lo + block] = mu
            var[lo:lo + block] = (c**2).mean(axis=0)
            m4[lo:lo + block] = (c**4).mean(axis=0)
        se_mean = np.sqrt(var / sample_count)
        se_var = np.sqrt(np.maximum(m4 - var**2, 0.0) / sample_count)
        draws = sample_count
    gval = g_of(g, a, distribution, phi)
    live = phi > 1e-15  # condition 1 is vacuous at phi = 0
    rel = 1e-12 * np.maximum(gval, 1e-300)
    slack = mean - gval
    drop_ok = (mean + z * se_mean + rel >= gval) | ~live
    positive = live & (mean > 0)
    denom = (s2 - 1.0) * mean**2
    ratio = np.where(positive, var / np.where(positive, denom, 1.0), 0.0)
    hi_drop = mean + z * se_mean
    var_ok = (var - z * se_var <= (s2 - 1.0) * hi_drop**2 * (1 + 1e-12)) | ~positive
    slack_live = np.where(live, slack, np.inf)
    return GoodnessReport(
        distribution=distribution,
        samples=int(xs.shape[1]),
        draws=int(draws),
        exact=exact,
        sigma_sq=float(s2),
        min_slack_drop=float(slack_live.min()) if live.any() else 0.0,
        max_var_ratio=float(ratio.max()) if positive.any() else 0.0,
        drop_pass=bool(drop_ok.all()),
        var_pass=bool(var_ok.all()),
        worst_drop_vector=int(np.argmin(slack_live)) if live.any() else -1,
        worst_var_vector=int(np.argmax(ratio)) if positive.any() else -1,
        details={"mean_drop": mean, "var": var, "se_mean": se_mean, "se_var": se_var,
                 "g": gval, "phi": phi,
                 "inclusion_p": rm_probability(g.d) if p is None else p},
    )

