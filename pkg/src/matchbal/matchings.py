"""Matching distributions and the balancing operator.

Three distributions produce the matchings used by the processes:

* random matchings (two-phase: Bernoulli edge sample, then keep isolated edges),
* balancing circuits (a fixed periodic list of matchings covering all edges),
* single random oriented edges (the asynchronous model).

A :class:`Matching` doubles as the implicit balancing matrix: matched pairs
average with weight ``beta/2``; unmatched nodes keep their load.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleScheme, InvalidSpec, NonIntegerLoad
from .graphs import Graph

__all__ = [
    "Matching",
    "Circuit",
    "OrientedEdge",
    "rm_probability",
    "survival_probability",
    "sample_random_matching",
    "sample_matching_indicators",
    "build_circuit",
    "sample_single_edge",
    "apply_matching",
    "matching_matrix",
    "format_matching_line",
    "format_edge_line",
    "parse_log_line",
    "SCHEMES",
]

SCHEMES = ("odd_even_cycle", "odd_even_torus", "dimension_exchange", "greedy_coloring")


def rm_probability(d: int) -> float:
    """Default phase-one inclusion probability 1/(4d) - 1/(16d^2)."""
    return 1.0 / (4 * d) - 1.0 / (16 * d * d)


def survival_probability(d: int, p: float | None = None) -> float:
    """Exact probability that a given edge of a simple d-regular graph survives phase two."""
    p = rm_probability(d) if p is None else p
    return p * (1.0 - p) ** (2 * (d - 1))


def _canonical(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    arr = np.sort(arr, axis=1)
    if arr.shape[0]:
        arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
    return arr


@dataclass(frozen=True, eq=False)
class Matching:
    pairs: np.ndarray
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise InvalidSpec(f"beta must lie in (0, 1], got {self.beta}")
        object.__setattr__(self, "pairs", _canonical(self.pairs))
        self.pairs.setflags(write=False)
        if not self.is_proper():
            raise InvalidSpec("matching pairs must be pairwise disjoint")
        if np.any(self.pairs[:, 0] == self.pairs[:, 1]):
            raise InvalidSpec("matching pairs must join distinct nodes")

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Matching) and self.beta == other.beta
                and np.array_equal(self.pairs, other.pairs))

    def is_proper(self) -> bool:
        flat = self.pairs.ravel()
        return np.unique(flat).shape[0] == flat.shape[0]

    def within(self, g: Graph) -> bool:
        return all(g.has_edge(int(i), int(j)) for i, j in self.pairs)

    def with_beta(self, beta: float) -> "Matching":
        return Matching(self.pairs, beta)


@dataclass(frozen=True, eq=False)
class Circuit:
    matchings: tuple[Matching, ...]
    scheme: str
    n: int = 0

    @property
    def period(self) -> int:
        return len(self.matchings)

    def at_step(self, t: int) -> Matching:
        """Matching used at step t (1-based)."""
        return self.matchings[(t - 1) % self.period]

    def covers(self, g: Graph) -> bool:
        seen = {(int(i), int(j)) for m in self.matchings for i, j in m.pairs}
        return seen >= {(int(i), int(j)) for i, j in g.edges}

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """(ptr, pairs) CSR layout consumed by the simulation kernels."""
        sizes = [len(m) for m in self.matchings]
        ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        pairs = np.concatenate([m.pairs for m in self.matchings]).astype(np.int64)
        return ptr, pairs.reshape(-1, 2)


@dataclass(frozen=True)
class OrientedEdge:
    i: int  # allocation endpoint
    j: int

    def as_matching(self, beta: float = 1.0) -> Matching:
        return Matching(np.array([[self.i, self.j]]), beta)


def survivors(edges: np.ndarray, n: int, chosen: np.ndarray) -> np.ndarray:
    """Keep chosen edges whose endpoints touch no other chosen edge."""
    deg = np.zeros(n, dtype=np.int64)
    sel = edges[chosen]
    np.add.at(deg, sel[:, 0], 1)
    np.add.at(deg, sel[:, 1], 1)
    return chosen & (deg[edges[:, 0]] == 1) & (deg[edges[:, 1]] == 1)


def sample_random_matching(g: Graph, rng: np.random.Generator, p: float | None = None,
                           beta: float = 1.0) -> Matching:
    p = rm_probability(g.d) if p is None else p
    chosen = rng.random(g.num_edges) < p
    keep = survivors(g.edges, g.n, chosen)
    return Matching(g.edges[keep], beta)


def sample_matching_indicators(g: Graph, rng: np.random.Generator, count: int,
                               p: float | None = None) -> np.ndarray:
    """Boolean matrix (count, |E|): row s marks the edges of the s-th random matching.

    Row ``s`` equals the edge set :func:`sample_random_matching` would return
    for the same stream position.
    """
    p = rm_probability(g.d) if p is None else p
    chosen = rng.random((count, g.num_edges)) < p
    inc = np.zeros((g.num_edges, g.n), dtype=np.int32)
    idx = np.arange(g.num_edges)
    inc[idx, g.edges[:, 0]] = 1
    inc[idx, g.edges[:, 1]] = 1
    deg = chosen.astype(np.int32) @ inc
    return chosen & (deg[:, g.edges[:, 0]] == 1) & (deg[:, g.edges[:, 1]] == 1)


def _odd_even_cycle(g: Graph) -> list[np.ndarray]:
    n = g.n
    is_ring = g.family == "cycle" or (g.family == "torus" and g.params.get("r") == 1)
    if not is_ring:
        raise IncompatibleScheme("odd_even_cycle needs a cycle")
    if n % 2:
        raise IncompatibleScheme("odd-even scheme needs an even cycle length")
    first = [(i, i + 1) for i in range(0, n, 2)]
    second = [(i, (i + 1) % n) for i in range(1, n, 2)]
    return [np.array(first), np.array(second)]


def _odd_even_torus(g: Graph) -> list[np.ndarray]:
    if g.family != "torus":
        raise IncompatibleScheme("odd_even_torus needs a torus")
    r, k = int(g.params["r"]), int(g.params["k"])
    if k % 2:
        raise IncompatibleScheme("odd-even torus scheme needs an even side length")
    nodes = np.arange(g.n)
    out = []
    for i in range(r):
        stride = k**i
        coord = (nodes // stride) % k
        for parity in (0, 1):
            u = nodes[coord % 2 == parity]
            cu = (u // stride) % k
            v = u + (((cu + 1) % k) - cu) * stride
            out.append(np.column_stack([u, v]))
    return out


def _dimension_exchange(g: Graph) -> list[np.ndarray]:
    if g.family != "hypercube":
        raise IncompatibleScheme("dimension_exchange needs a hypercube")
    nodes = np.arange(g.n)
    out = []
    for i in range(int(g.params["r"])):
        u = nodes[(nodes >> i) & 1 == 0]
        out.append(np.column_stack([u, u ^ (1 << i)]))
    return out


def _greedy_coloring(g: Graph) -> list[np.ndarray]:
    used: list[set[int]] = [set() for _ in range(g.n)]
    classes: list[list[tuple[int, int]]] = []
    for i, j in g.edges:
        i, j = int(i), int(j)
        c = 0
        while c in used[i] or c in used[j]:
            c += 1
        if c == len(classes):
            classes.append([])
        classes[c].append((i, j))
        used[i].add(c)
        used[j].add(c)
    return [np.array(c) for c in classes]


def default_scheme(g: Graph) -> str:
    if g.family == "cycle" and g.n % 2 == 0:
        return "odd_even_cycle"
    if g.family == "torus" and int(g.params.get("k", 1)) % 2 == 0:
        return "odd_even_torus"
    if g.family == "hypercube":
        return "dimension_exchange"
    return "greedy_coloring"


def build_circuit(g: Graph, scheme: str | None = None) -> Circuit:
    scheme = default_scheme(g) if scheme is None else scheme
    builders = {
        "odd_even_cycle": _odd_even_cycle,
        "odd_even_torus": _odd_even_torus,
        "dimension_exchange": _dimension_exchange,
        "greedy_coloring": _greedy_coloring,
    }
    if scheme not in builders:
        raise IncompatibleScheme(f"unknown scheme {scheme!r}")
    ms = tuple(Matching(p) for p in builders[scheme](g))
    return Circuit(ms, scheme, g.n)


def sample_single_edge(g: Graph, rng: np.random.Generator) -> OrientedEdge:
    """Uniform node, uniform incident edge, fair coin for the allocation endpoint."""
    nd = g.n * g.d
    arc = min(int(rng.random() * nd), nd - 1)
    u, v = arc // g.d, int(g.neighbors[arc // g.d, arc % g.d])
    if rng.random() < 0.5:
        return OrientedEdge(u, v)
    return OrientedEdge(v, u)


def apply_matching(x: np.ndarray, m: Matching, mode: str = "discrete",
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Balance every matched pair once.

    Returns the new load vector and the rounding error vector ``e`` (actual
    minus ideal load after balancing; ``e_i = -e_j`` on each pair).
    """
    beta = m.beta
    if mode == "continuous":
        y = np.asarray(x, dtype=np.float64).copy()
        if len(m):
            i, j = m.pairs[:, 0], m.pairs[:, 1]
            tr = beta * (y[i] - y[j]) / 2.0
            y[i] -= tr
            y[j] += tr
        return y, np.zeros_like(y)
    if mode != "discrete":
        raise InvalidSpec(f"unknown mode {mode!r}")
    xa = np.asarray(x)
    if not np.issubdtype(xa.dtype, np.integer):
        if np.any(xa != np.round(xa)):
            raise NonIntegerLoad("discrete balancing needs integer loads")
    y = xa.astype(np.int64).copy()
    e = np.zeros(y.shape[0])
    if rng is None:
        rng = np.random.default_rng()
    for a, b in m.pairs:
        hi, lo = (a, b) if y[a] >= y[b] else (b, a)
        diff = int(y[hi] - y[lo])
        if beta == 1.0:
            amt = diff / 2.0
            load = diff >> 1
            if diff & 1 and rng.random() < 0.5:
                load += 1
        else:
            amt = beta * diff / 2.0
            fl = np.floor(amt)
            load = int(fl)
            if amt > fl and rng.random() < amt - fl:
                load += 1
        y[hi] -= load
        y[lo] += load
        e[hi] = amt - load
        e[lo] = load - amt
    return y, e


def matching_matrix(n: int, m: Matching) -> np.ndarray:
    """Explicit n x n balancing matrix of a matching (test and small-n use)."""
    mat = np.eye(n)
    b = m.beta
    for i, j in m.pairs:
        mat[i, i] = mat[j, j] = 1.0 - b / 2.0
        mat[i, j] = mat[j, i] = b / 2.0
    return mat


def format_matching_line(t: int, pairs: np.ndarray) -> str:
    flat = " ".join(str(int(v)) for v in np.asarray(pairs).ravel())
    return f"{t} {len(pairs)} {flat}".rstrip()


def format_edge_line(t: int, edge: OrientedEdge) -> str:
    return f"{t} A {edge.i} {edge.j}"


def parse_log_line(line: str) -> tuple[int, np.ndarray | OrientedEdge]:
    parts = line.split()
    t = int(parts[0])
    if parts[1] == "A":
        return t, OrientedEdge(int(parts[2]), int(parts[3]))
    count = int(parts[1])
    vals = np.array([int(v) for v in parts[2:]], dtype=np.int64)
    if vals.shape[0] != 2 * count:
        raise InvalidSpec(f"log line for step {t} declares {count} pairs, has {vals.shape[0] // 2}")
    return t, vals.reshape(-1, 2)
