"""Synchronous and asynchronous balancing processes with coupled twins.

A run keeps three vectors in lock-step: the discrete load ``X``, the
idealized continuous twin ``X_ideal`` (same allocations and matchings, no
rounding) and the initial-load twin ``X_init`` (same matchings only). Their
differences give the initial, dynamic and rounding contributions exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .errors import InvalidSpec, NumericalFailure
from .graphs import Graph
from .matchings import (Circuit, Matching, OrientedEdge, build_circuit, format_edge_line,
                        format_matching_line, parse_log_line, rm_probability)

__all__ = [
    "MODELS",
    "ProcessConfig",
    "Streams",
    "LoadState",
    "ReplayLog",
    "MetricsSeries",
    "initial_state",
    "step_sync",
    "step_async",
    "run",
    "replay",
    "decompose",
    "checkpoint_schedule",
    "first_balanced_time",
]

MODELS = ("sync_random", "sync_circuit", "async_single")
ALLOC, MATCH, ROUND = 0, 1, 2


@dataclass
class ProcessConfig:
    model: str = "sync_random"
    beta: float = 1.0
    m: int = 1
    initial_load: Sequence[int] | np.ndarray | None = None
    seed: int = 0
    horizon: int = 0
    discrete: bool = True
    rm_probability: float | None = None
    record_log: bool = False
    checkpoints: str | Sequence[int] = "pow2"
    audit: bool = False

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise InvalidSpec(f"unknown model {self.model!r}")
        if not 0.0 < self.beta <= 1.0:
            raise InvalidSpec("beta must lie in (0, 1]")
        if self.model == "sync_circuit" and self.beta != 1.0:
            raise InvalidSpec("the circuit model balances with beta = 1")
        if self.m < 0 or int(self.m) != self.m:
            raise InvalidSpec("m must be a non-negative integer")
        if self.horizon < 0:
            raise InvalidSpec("horizon must be non-negative")
        if self.initial_load is not None:
            x = np.asarray(self.initial_load)
            if np.any(x < 0) or np.any(x != np.round(x)):
                raise InvalidSpec("initial load must be non-negative integers")

    @property
    def items_per_step(self) -> int:
        return 1 if self.model == "async_single" else int(self.m)


@dataclass
class Streams:
    allocation: np.random.Generator
    matching: np.random.Generator
    rounding: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        gens = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
                for k in (ALLOC, MATCH, ROUND)]
        return cls(*gens)


@dataclass
class LoadState:
    t: int
    X: np.ndarray
    X_ideal: np.ndarray
    X_init: np.ndarray
    total_allocated: int
    initial_total: int
    streams: Streams
    track_init: bool

    def copy(self) -> "LoadState":
        return LoadState(self.t, self.X.copy(), self.X_ideal.copy(), self.X_init.copy(),
                         self.total_allocated, self.initial_total, self.streams, self.track_init)


@dataclass
class ReplayLog:
    """Per-step matchings (pairs), rounding errors and allocations.

    ``pairs[step_ptr[s]:step_ptr[s+1]]`` are the balanced pairs of step s+1.
    ``errors[q]`` is the rounding error at ``pairs[q, 0]``; its partner gets the
    negative. For the asynchronous model each step has one row
    ``(allocation endpoint, other endpoint)``.
    """

    model: str
    n: int
    beta: float
    step_ptr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    alloc_ptr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    allocations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.step_ptr.shape[0] - 1)

    def pairs_at(self, t: int) -> np.ndarray:
        return self.pairs[self.step_ptr[t - 1]:self.step_ptr[t]]

    def matching_at(self, t: int) -> Matching:
        return Matching(self.pairs_at(t), self.beta)

    def rounding_vector(self, t: int) -> np.ndarray:
        e = np.zeros(self.n)
        lo, hi = self.step_ptr[t - 1], self.step_ptr[t]
        e[self.pairs[lo:hi, 0]] = self.errors[lo:hi]
        e[self.pairs[lo:hi, 1]] = -self.errors[lo:hi]
        return e

    def allocation_vector(self, t: int) -> np.ndarray:
        nodes = self.allocations[self.alloc_ptr[t - 1]:self.alloc_ptr[t]]
        return np.bincount(nodes, minlength=self.n).astype(np.int64)

    def extend(self, other: "ReplayLog") -> None:
        self.step_ptr = np.concatenate([self.step_ptr, other.step_ptr[1:] + self.step_ptr[-1]])
        self.pairs = np.concatenate([self.pairs, other.pairs])
        self.errors = np.concatenate([self.errors, other.errors])
        self.alloc_ptr = np.concatenate([self.alloc_ptr, other.alloc_ptr[1:] + self.alloc_ptr[-1]])
        self.allocations = np.concatenate([self.allocations, other.allocations])

    @classmethod
    def from_matchings(cls, n: int, beta: float, matchings: Sequence[np.ndarray],
                       model: str = "sync_random") -> "ReplayLog":
        arrs = [np.asarray(m, dtype=np.int64).reshape(-1, 2) for m in matchings]
        sizes = [a.shape[0] for a in arrs]
        ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        pairs = np.concatenate(arrs) if arrs else np.zeros((0, 2), dtype=np.int64)
        return cls(model, n, beta, ptr, pairs, np.zeros(pairs.shape[0]),
                   np.zeros(len(arrs) + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def for_circuit(cls, circuit: Circuit, steps: int) -> "ReplayLog":
        ms = [circuit.at_step(t).pairs for t in range(1, steps + 1)]
        return cls.from_matchings(circuit.n, 1.0, ms, model="sync_circuit")

    def lines(self) -> list[str]:
        out = []
        for t in range(1, len(self) + 1):
            p = self.pairs_at(t)
            if self.model == "async_single":
                out.append(format_edge_line(t, OrientedEdge(int(p[0, 0]), int(p[0, 1]))))
            else:
                out.append(format_matching_line(t, p))
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    @classmethod
    def read(cls, path, n: int, beta: float) -> "ReplayLog":
        steps, model = [], "sync_random"
        with open(path) as fh:
            for expected, line in enumerate((ln for ln in fh if ln.strip()), start=1):
                t, rec = parse_log_line(line)
                if t != expected:
                    raise InvalidSpec(f"log steps out of order at line {expected}")
                if isinstance(rec, OrientedEdge):
                    model = "async_single"
                    rec = np.array([[rec.i, rec.j]])
                steps.append(rec)
        return cls.from_matchings(n, beta, steps, model=model)


@dataclass
class MetricsSeries:
    t: list[int] = field(default_factory=list)
    disc: list[float] = field(default_factory=list)
    disc_init: list[float] = field(default_factory=list)
    disc_dyn: list[float] = field(default_factory=list)
    disc_round: list[float] = field(default_factory=list)
    phi: list[float] = field(default_factory=list)
    max_dev: list[float] = field(default_factory=list)

    def record(self, state: LoadState) -> None:
        init, dyn, rnd = decompose(state)
        x = state.X.astype(np.float64)
        disc = float(x.max() - x.min())
        d_init = float(np.ptp(init))
        d_dyn = float(np.ptp(dyn))
        d_rnd = float(np.ptp(rnd))
        # sub-additivity and the dynamic max-deviation bound must hold on every checkpoint
        slack = 1e-9 * max(1.0, abs(x).max())
        if disc > d_init + d_dyn + d_rnd + slack:
            raise NumericalFailure(f"discrepancy sub-additivity violated at t={state.t}")
        dmean = state.total_allocated / state.X.shape[0]
        if d_dyn > 2 * np.abs(dyn - dmean).max() + slack:
            raise NumericalFailure(f"dynamic max-deviation bound violated at t={state.t}")
        self.t.append(state.t)
        self.disc.append(disc)
        self.disc_init.append(d_init)
        self.disc_dyn.append(d_dyn)
        self.disc_round.append(d_rnd)
        self.phi.append(float(np.sum((x - x.mean()) ** 2)))
        self.max_dev.append(float(np.abs(x - x.mean()).max()))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MetricsSeries) and self.__dict__ == other.__dict__

    def last(self) -> dict[str, float]:
        return {k: v[-1] for k, v in self.__dict__.items()}

    def rows(self) -> list[dict[str, float]]:
        keys = list(self.__dict__)
        return [dict(zip(keys, vals)) for vals in zip(*self.__dict__.values())]


def initial_state(config: ProcessConfig, g: Graph) -> LoadState:
    if config.initial_load is None:
        x = np.zeros(g.n, dtype=np.int64)
    else:
        x = np.asarray(config.initial_load, dtype=np.int64).copy()
        if x.shape != (g.n,):
            raise InvalidSpec(f"initial load has shape {x.shape}, expected ({g.n},)")
    track = bool(np.any(x))
    X = x if config.discrete else x.astype(np.float64)
    return LoadState(0, X, x.astype(np.float64), x.astype(np.float64), 0, int(x.sum()),
                     Streams.from_seed(config.seed), track)


def checkpoint_schedule(horizon: int, spec: str | Sequence[int] = "pow2") -> list[int]:
    if isinstance(spec, str):
        if spec != "pow2":
            raise InvalidSpec(f"unknown checkpoint schedule {spec!r}")
        pts = []
        t = 1
        while t <= horizon:
            pts.append(t)
            t *= 2
    else:
        pts = [int(t) for t in spec if 0 < int(t) <= horizon]
    pts.append(horizon)
    return sorted({0, *pts})


def _advance(state: LoadState, config: ProcessConfig, g: Graph, circuit: Circuit | None,
             steps: int, log: ReplayLog | None, stop_thr: float = -1.0) -> int:
    """Advance the state by up to `steps` steps; returns steps executed."""
    if steps <= 0:
        return 0
    st = state.streams
    discrete = config.discrete
    x = state.X if discrete else np.zeros(1, dtype=np.int64)
    x0 = state.X_init if state.track_init else np.zeros(1)
    log_on = log is not None
    n = g.n
    if config.model == "async_single":
        cap = steps if log_on else 0
        lp = np.zeros((cap, 2), dtype=np.int64)
        le = np.zeros(cap)
        status, done = K.async_steps(g.neighbors, x, state.X_ideal, x0, state.track_init,
                                     float(config.beta), discrete, steps, st.allocation,
                                     st.matching, st.rounding, log_on, lp, le, config.audit,
                                     float(stop_thr))
        pairs_logged = done
        alloc_logged = done
        counts = np.ones(done, dtype=np.int64)
        alloc = lp[:done, 0].copy() if log_on else None
    else:
        use_circ = config.model == "sync_circuit"
        if use_circ:
            if circuit is None:
                raise InvalidSpec("sync_circuit needs a Circuit")
            ptr, cpairs = circuit.packed()
        else:
            ptr, cpairs = np.zeros(2, dtype=np.int64), np.zeros((0, 2), dtype=np.int64)
        p = rm_probability(g.d) if config.rm_probability is None else float(config.rm_probability)
        m = config.items_per_step
        cap_pairs = steps * (n // 2) if log_on else 0
        cap_alloc = steps * m if log_on else 0
        counts = np.zeros(steps if log_on else 0, dtype=np.int64)
        lp = np.zeros((cap_pairs, 2), dtype=np.int64)
        le = np.zeros(cap_pairs)
        la = np.zeros(cap_alloc, dtype=np.int64)
        status, done, pairs_logged = K.sync_steps(
            g.edges, n, x, state.X_ideal, x0, state.track_init, float(config.beta),
            discrete, steps, state.t, m, use_circ, ptr, cpairs, p, st.allocation,
            st.matching, st.rounding, log_on, counts, lp, le, la, config.audit, float(stop_thr))
        counts = counts[:done]
        alloc_logged = done * m
        alloc = la[:alloc_logged]
    if status != K.OK:
        what = "conservation" if status == K.CONSERVATION else "max/min contraction"
        raise NumericalFailure(f"{what} violated at step {state.t + done + 1}")
    state.t += done
    state.total_allocated += done * config.items_per_step
    if not discrete:
        state.X = state.X_ideal.copy()
    if log_on:
        chunk = ReplayLog(config.model, n, config.beta,
                          np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
                          lp[:pairs_logged].copy(), le[:pairs_logged].copy(),
                          np.arange(0, alloc_logged + 1, config.items_per_step, dtype=np.int64)
                          if config.items_per_step else np.zeros(done + 1, dtype=np.int64),
                          alloc.copy())
        log.extend(chunk)
    return done


def step_sync(state: LoadState, config: ProcessConfig, g: Graph,
              circuit: Circuit | None = None, log: ReplayLog | None = None) -> LoadState:
    """One synchronous round: allocate m items, sample/select a matching, balance."""
    if config.model not in ("sync_random", "sync_circuit"):
        raise InvalidSpec("step_sync needs a synchronous model")
    _advance(state, config, g, circuit, 1, log)
    return state


def step_async(state: LoadState, config: ProcessConfig, g: Graph,
               log: ReplayLog | None = None) -> LoadState:
    """One asynchronous step: oriented edge, one item at its allocation end, balance."""
    if config.model != "async_single":
        raise InvalidSpec("step_async needs the async_single model")
    _advance(state, config, g, None, 1, log)
    return state


def run(config: ProcessConfig, g: Graph, circuit: Circuit | None = None
        ) -> tuple[LoadState, ReplayLog | None, MetricsSeries]:
    if config.model == "sync_circuit" and circuit is None:
        circuit = build_circuit(g)
    if config.model != "sync_circuit" and circuit is not None:
        raise InvalidSpec("a circuit is only meaningful for the sync_circuit model")
    state = initial_state(config, g)
    log = ReplayLog(config.model, g.n, config.beta) if config.record_log else None
    metrics = MetricsSeries()
    for cp in checkpoint_schedule(config.horizon, config.checkpoints):
        _advance(state, config, g, circuit, cp - state.t, log)
        metrics.record(state)
    return state, log, metrics


def first_balanced_time(config: ProcessConfig, g: Graph, threshold: float, max_steps: int,
                        circuit: Circuit | None = None) -> int | None:
    """First step at which disc(X_init) <= threshold, or None within max_steps."""
    if config.model == "sync_circuit" and circuit is None:
        circuit = build_circuit(g)
    state = initial_state(config, g)
    if not state.track_init or np.ptp(state.X_init) <= threshold:
        return 0
    done = _advance(state, config, g, circuit, max_steps, None, stop_thr=threshold)
    if np.ptp(state.X_init) <= threshold:
        return done
    return None


def replay(log: ReplayLog, config: ProcessConfig, g: Graph) -> LoadState:
    """Re-execute a run step by step in Python, taking matchings from the log.

    Allocation and rounding draws come from the config's seed streams, so the
    result must equal the compiled run bit for bit.
    """
    from .matchings import apply_matching

    state = initial_state(config, g)
    st = state.streams
    n = g.n
    for t in range(1, len(log) + 1):
        pairs = log.pairs_at(t)
        if config.model == "async_single":
            st.allocation.random()
            nodes = [int(pairs[0, 0])]
        else:
            nodes = [min(int(st.allocation.random() * n), n - 1) for _ in range(config.m)]
        for a in nodes:
            state.X_ideal[a] += 1.0
            state.X[a] += 1
        m = Matching(pairs, config.beta)
        if config.discrete:
            state.X = _apply_in_order(state.X, pairs, config.beta, st.rounding)
        state.X_ideal = apply_matching(state.X_ideal, m, "continuous")[0]
        if state.track_init:
            state.X_init = apply_matching(state.X_init, m, "continuous")[0]
        state.t = t
        state.total_allocated += len(nodes)
    if not config.discrete:
        state.X = state.X_ideal.copy()
    return state


def _apply_in_order(x: np.ndarray, pairs: np.ndarray, beta: float,
                    rng: np.random.Generator) -> np.ndarray:
    from .matchings import apply_matching

    y = x
    for a, b in pairs:
        m = Matching(np.array([[a, b]]), beta)
        y = apply_matching(y, m, "discrete", rng)[0]
    return y


def decompose(state: LoadState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(initial contribution, dynamic contribution, rounding contribution)."""
    init = state.X_init.copy() if state.track_init else np.zeros_like(state.X_ideal)
    return init, state.X_ideal - init, state.X.astype(np.float64) - state.X_ideal
