"""Regular graph families and structural validation.

Every generator returns an immutable :class:`Graph` with 0-based node ids,
sorted neighbor lists and a canonical edge list (``i < j``, lexicographic).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ConstructionFailed, InvalidSpec

__all__ = [
    "Graph",
    "GraphSpec",
    "ValidationReport",
    "generate",
    "validate",
    "from_edges",
    "cycle",
    "torus",
    "hypercube",
    "complete",
    "random_regular",
]

FAMILIES = ("cycle", "torus", "hypercube", "random_regular", "complete")
RANDOM_REGULAR_RESTARTS = 10_000


@dataclass(frozen=True, eq=False)
class Graph:
    """A d-regular simple graph.

    Attributes
    ----------
    n, d : int
        Node count and (uniform) degree.
    neighbors : ndarray, shape (n, d)
        Row ``i`` holds the sorted neighbor ids of node ``i``.
    edges : ndarray, shape (|E|, 2)
        Canonical unordered edges with ``edges[:, 0] < edges[:, 1]``.
    name : str
        Human-readable label such as ``"torus(2,4)"``.
    """

    n: int
    d: int
    neighbors: np.ndarray
    edges: np.ndarray
    name: str = ""
    family: str = ""
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.neighbors.setflags(write=False)
        self.edges.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.edges[:, 0], self.edges[:, 1]] = 1.0
        a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def laplacian(self) -> np.ndarray:
        """Combinatorial Laplacian d*I - A."""
        return self.d * np.eye(self.n) - self.adjacency()

    def has_edge(self, i: int, j: int) -> bool:
        row = self.neighbors[i]
        k = np.searchsorted(row, j)
        return bool(k < row.shape[0] and row[k] == j)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}

    def __repr__(self) -> str:
        return f"Graph({self.name or 'custom'}, n={self.n}, d={self.d})"


@dataclass(frozen=True)
class GraphSpec:
    family: str
    n: int | None = None
    r: int | None = None
    k: int | None = None
    d: int | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GraphSpec":
        known = {"family", "n", "r", "k", "d", "seed"}
        extra = set(data) - known
        if extra:
            raise InvalidSpec(f"unknown graph spec keys: {sorted(extra)}")
        if "family" not in data:
            raise InvalidSpec("graph spec needs a 'family'")
        return cls(**{key: data[key] for key in known if key in data})

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family}
        for key in ("n", "r", "k", "d"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.family == "random_regular":
            out["seed"] = self.seed
        return out


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        # truthy when there is something to report
        return bool(self.violations)

    def __contains__(self, key: str) -> bool:
        return any(key in v for v in self.violations)


def _build(n: int, edge_set: set[tuple[int, int]], name: str, family: str,
           params: Mapping[str, Any]) -> Graph:
    edges = np.array(sorted(edge_set), dtype=np.int64).reshape(-1, 2)
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(int(j))
        adj[j].append(int(i))
    degrees = {len(a) for a in adj}
    if len(degrees) != 1:
        raise InvalidSpec(f"{name} is not regular (degrees {sorted(degrees)})")
    d = degrees.pop()
    nbr = np.array([sorted(a) for a in adj], dtype=np.int64).reshape(n, d)
    return Graph(n=n, d=d, neighbors=nbr, edges=edges, name=name,
                 family=family, params=dict(params))


def from_edges(n: int, edge_list, name: str = "custom") -> Graph:
    """Build a graph from an explicit edge list (must be simple and regular)."""
    es: set[tuple[int, int]] = set()
    for i, j in edge_list:
        i, j = int(i), int(j)
        if i == j:
            raise InvalidSpec("self-loop")
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidSpec("node id out of range")
        e = (min(i, j), max(i, j))
        if e in es:
            raise InvalidSpec("parallel edge")
        es.add(e)
    g = _build(n, es, name, "custom", {})
    rep = validate(g)
    if not rep.ok:
        raise InvalidSpec("; ".join(rep.violations))
    return g


def cycle(n: int) -> Graph:
    if n < 3:
        raise InvalidSpec("cycle needs n >= 3")
    es = {(min(i, (i + 1) % n), max(i, (i + 1) % n)) for i in range(n)}
    return _build(n, es, f"cycle({n})", "cycle", {"n": n})


def torus(r: int, k: int) -> Graph:
    """r-dimensional torus with side k; node id = sum c_i * k**i."""
    if r < 1:
        raise InvalidSpec("torus needs r >= 1")
    if k < 3:
        raise InvalidSpec("torus needs side k >= 3")
    n = k**r
    es: set[tuple[int, int]] = set()
    for u in range(n):
        for i in range(r):
            ci = (u // k**i) % k
            v = u + (((ci + 1) % k) - ci) * k**i
            es.add((min(u, v), max(u, v)))
    return _build(n, es, f"torus({r},{k})", "torus", {"r": r, "k": k})


def hypercube(r: int) -> Graph:
    if r < 2:
        # r=1 is a single edge, not a valid connected graph with n >= 3
        raise InvalidSpec("hypercube needs r >= 2")
    n = 1 << r
    es = {(u, u ^ (1 << i)) for u in range(n) for i in range(r) if u < u ^ (1 << i)}
    return _build(n, es, f"hypercube({r})", "hypercube", {"r": r})


def complete(n: int) -> Graph:
    if n < 3:
        raise InvalidSpec("complete graph needs n >= 3")
    es = {(i, j) for i in range(n) for j in range(i + 1, n)}
    return _build(n, es, f"complete({n})", "complete", {"n": n})


def random_regular(n: int, d: int, seed: int = 0,
                   max_restarts: int = RANDOM_REGULAR_RESTARTS) -> Graph:
    """Pairing-model d-regular graph; restarts on loops, multi-edges or disconnection."""
    if d < 1 or d >= n:
        raise InvalidSpec("random_regular needs 1 <= d < n")
    if (n * d) % 2:
        raise InvalidSpec("random_regular needs d*n even")
    if n < 3:
        raise InvalidSpec("random_regular needs n >= 3")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(max_restarts):
        perm = rng.permutation(stubs).reshape(-1, 2)
        a, b = perm[:, 0], perm[:, 1]
        if np.any(a == b):
            continue
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        if np.unique(keys).shape[0] != keys.shape[0]:
            continue
        es = set(zip(lo.tolist(), hi.tolist()))
        g = _build(n, es, f"random_regular({n},{d},seed={seed})", "random_regular",
                   {"n": n, "d": d, "seed": seed})
        if _connected(g.neighbors, n):
            return g
    raise ConstructionFailed(
        f"random_regular({n},{d}) not simple+connected after {max_restarts} restarts")


def generate(spec: GraphSpec | Mapping[str, Any]) -> Graph:
    if not isinstance(spec, GraphSpec):
        spec = GraphSpec.from_dict(spec)
    fam = spec.family
    if fam not in FAMILIES:
        raise InvalidSpec(f"unknown family {fam!r}; expected one of {FAMILIES}")

    def need(name: str) -> int:
        val = getattr(spec, name)
        if val is None:
            raise InvalidSpec(f"{fam} needs parameter {name!r}")
        if int(val) != val:
            raise InvalidSpec(f"{name} must be an integer")
        return int(val)

    if fam == "cycle":
        return cycle(need("n"))
    if fam == "torus":
        return torus(need("r"), need("k"))
    if fam == "hypercube":
        return hypercube(need("r"))
    if fam == "complete":
        return complete(need("n"))
    return random_regular(need("n"), need("d"), seed=int(spec.seed))


def _connected(nbr, n: int) -> bool:
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in nbr[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(int(v))
    return count == n


def validate(g: Graph) -> ValidationReport:
    """Check every Graph invariant; violations are returned, never raised."""
    rep = ValidationReport()
    nbr = [list(map(int, row)) for row in g.neighbors]
    n = g.n
    if len(nbr) != n:
        rep.violations.append(f"size: {len(nbr)} neighbor rows for n={n}")
        return rep
    for i, row in enumerate(nbr):
        if len(row) != g.d:
            rep.violations.append(f"degree: node {i} has {len(row)} neighbors, expected {g.d}")
        if i in row:
            rep.violations.append(f"self-loop: node {i}")
        if len(set(row)) != len(row):
            rep.violations.append(f"parallel edge: node {i}")
        if row != sorted(row):
            rep.violations.append(f"order: neighbors of {i} not sorted")
    sets = [set(r) for r in nbr]
    for i, row in enumerate(nbr):
        for j in row:
            if not (0 <= j < n) or i not in sets[j]:
                rep.violations.append(f"symmetry: {j} in N({i}) but not {i} in N({j})")
    e = np.asarray(g.edges)
    if e.shape[0] != g.d * n // 2 or (g.d * n) % 2:
        rep.violations.append(f"edge count: {e.shape[0]} edges, expected d*n/2")
    if e.size and np.any(e[:, 0] >= e[:, 1]):
        rep.violations.append("edge list: pairs not canonical (i<j)")
    edge_set = {(int(a), int(b)) for a, b in e}
    adj_pairs = {(i, j) for i, row in enumerate(nbr) for j in row if i < j}
    if edge_set != adj_pairs:
        rep.violations.append("edge list: disagrees with neighbor lists")
    if n and not _connected_lists(nbr, n):
        rep.violations.append("connected: graph is not connected")
    return rep


def _connected_lists(nbr: list[list[int]], n: int) -> bool:
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbr[u]:
            if 0 <= v < n and v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == n
