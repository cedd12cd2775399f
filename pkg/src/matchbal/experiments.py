"""Seeded multi-run sweeps, scaling regressions and the two targeted experiments."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np
from scipy import stats

from .bounds import (BoundParams, async_bound, circuit_bound, class_divergence_sq,
                     round_matrix_gap, sync_bound)
from .errors import InvalidSpec, ThresholdNotMet
from .graphs import Graph, GraphSpec, generate
from .matchings import Circuit, build_circuit
from .metrics import global_divergence
from .process import ProcessConfig, ReplayLog, first_balanced_time, run
from .spectral import GraphAnalytics, analyze

__all__ = [
    "CSV_COLUMNS",
    "ExperimentConfig",
    "CellSummary",
    "ScalingResult",
    "run_sweep",
    "write_sweep",
    "MemorylessnessConfig",
    "memorylessness_experiment",
    "LowerBoundConfig",
    "lower_bound_experiment",
    "class_prediction",
    "worker_count",
    "run_seed",
]

CSV_COLUMNS = ("run_id", "seed", "family", "n", "d", "model", "beta", "m", "t", "disc",
               "disc_init", "disc_dyn", "disc_round", "phi", "max_dev", "bound_rhs")
SIZE_KEY = {"cycle": "n", "complete": "n", "random_regular": "n", "torus": "k", "hypercube": "r"}


def worker_count() -> int:
    env = os.environ.get("MATCHBAL_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def pool_imap(fn: Callable, tasks: Sequence, workers: int | None = None) -> Iterator:
    """Results in task order; serial when capped to one worker."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        yield from ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers)))


def pool_map(fn: Callable, tasks: Sequence, workers: int | None = None) -> list:
    return list(pool_imap(fn, tasks, workers))


def run_seed(master: int, *key: int) -> int:
    """Deterministic 63-bit seed for a (cell, run) position under a master seed."""
    ss = np.random.SeedSequence([int(master) % 2**64, *[int(k) for k in key]])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@lru_cache(maxsize=64)
def _graph_cached(spec_json: str) -> Graph:
    return generate(json.loads(spec_json))


def _graph(spec: dict) -> Graph:
    return _graph_cached(json.dumps(spec, sort_keys=True))


def class_prediction(family: str, model: str, n: int, m: float, r: int | None = None
                     ) -> float | None:
    """Unit-constant discrepancy scale for each graph class and model."""
    ln = math.log(n)
    load = m / n
    rm_circuit_generic = ln + math.sqrt(m * ln)
    if family in ("cycle", "random_regular") or (family == "torus" and r == 1):
        return math.sqrt(n * ln) if model == "async_single" else rm_circuit_generic
    if family == "torus" and r == 2:
        return {"sync_random": ln + math.sqrt(load) * ln**1.5,
                "sync_circuit": (1 + math.sqrt(load)) * ln,
                "async_single": ln**1.5}[model]
    if family == "torus":
        return {"sync_random": (1 + math.sqrt(load)) * ln,
                "sync_circuit": ln + math.sqrt(load * ln),
                "async_single": ln}[model]
    if family == "hypercube":
        return ln if model == "async_single" else (1 + math.sqrt(load)) * ln
    return None


def leading_exponent(family: str, model: str, m_policy) -> float | None:
    """Polynomial exponent of the predicted scale in n (log factors ignored)."""
    if family in ("cycle", "random_regular"):
        if model == "async_single":
            return 0.5
        return 0.5 if m_policy == "n" else 0.0
    if family in ("torus", "hypercube"):
        return 0.0
    return None


@dataclass
class ExperimentConfig:
    graph: dict
    sizes: list[int]
    model: str = "sync_random"
    beta: float = 1.0
    m: int | str = "n"
    horizon: dict = field(default_factory=lambda: {"warmup_multiple": 4.0})
    runs: int = 10
    seed: int = 0
    checkpoints: str | list[int] = "pow2"
    initial_load: dict | None = None
    rm_probability: float | None = None
    circuit_scheme: str | None = None
    gamma: float = 2.0
    plot: bool = True

    def __post_init__(self) -> None:
        fam = self.graph.get("family")
        if fam not in SIZE_KEY:
            raise InvalidSpec(f"unknown family {fam!r}")
        if len(self.sizes) < 1 or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise InvalidSpec("sizes must be strictly increasing")
        if self.runs < 1:
            raise InvalidSpec("runs must be positive")
        if not isinstance(self.m, int) and self.m != "n":
            raise InvalidSpec("m must be an integer or 'n'")
        if not ({"warmup_multiple", "steps"} >= set(self.horizon) and len(self.horizon) == 1):
            raise InvalidSpec("horizon must be {'warmup_multiple': x} or {'steps': t}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        allowed = {f for f in cls.__dataclass_fields__}
        extra = set(data) - allowed - {"kind"}
        if extra:
            raise InvalidSpec(f"unknown sweep config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items() if k in allowed})

    def graph_spec(self, size: int) -> dict:
        spec = dict(self.graph)
        spec[SIZE_KEY[spec["family"]]] = int(size)
        return spec


@dataclass
class CellSummary:
    size: int
    n: int
    d: int
    m: int
    runs: int
    horizon: int
    warmup: float
    bound_rhs: float
    prediction: float | None
    median: float
    mean: float
    p95: float
    median_init: float
    median_dyn: float
    median_round: float
    divergence: float | None = None


@dataclass
class ScalingResult:
    family: str
    model: str
    cells: list[CellSummary]
    slope: float | None
    slope_ci: tuple[float, float] | None
    intercept: float | None
    predicted_exponent: float | None
    predicted_slope: float | None
    log_ratio_drift: float
    rhs_ratio_drift: float

    def to_dict(self) -> dict:
        out = asdict(self)
        out["cells"] = [asdict(c) for c in self.cells]
        return out


def _initial_load(cfg: dict | None, n: int) -> np.ndarray | None:
    if not cfg:
        return None
    x = np.zeros(n, dtype=np.int64)
    node = int(cfg.get("node", 0))
    if "per_node" in cfg:
        x[node] = int(cfg["per_node"]) * n
    elif "total" in cfg:
        x[node] = int(cfg["total"])
    else:
        raise InvalidSpec("initial_load needs 'per_node' or 'total'")
    return x


def _cell_setup(cfg: ExperimentConfig, size: int) -> dict:
    spec = cfg.graph_spec(size)
    g = _graph(spec)
    a = analyze(g)
    m = g.n if cfg.m == "n" else int(cfg.m)
    x0 = _initial_load(cfg.initial_load, g.n)
    K = float(np.ptp(x0)) if x0 is not None else 0.0
    params = BoundParams(gamma=cfg.gamma, K=K, m=m, beta=cfg.beta)
    circuit = divergence = lam_r = None
    if cfg.model == "sync_circuit":
        circuit = build_circuit(g, cfg.circuit_scheme)
        lam_r = round_matrix_gap(circuit, g.n)
        warmup = circuit.period / lam_r * math.log(params.K_eff * g.n)
    elif cfg.model == "async_single":
        warmup = async_bound(g, a, params)[0]
    else:
        warmup = sync_bound(g, a, params)[0]
    if "steps" in cfg.horizon:
        horizon = int(cfg.horizon["steps"])
    else:
        horizon = int(math.ceil(cfg.horizon["warmup_multiple"] * warmup))
    if cfg.model == "sync_circuit":
        log = ReplayLog.for_circuit(circuit, horizon)
        divergence = global_divergence(log, g).max_value if horizon else 0.0
        rhs = circuit_bound(g, circuit, divergence, params, lam_r)[1]
    elif cfg.model == "async_single":
        rhs = async_bound(g, a, params)[1]
    else:
        rhs = sync_bound(g, a, params)[1]
    return {"spec": spec, "g": g, "a": a, "m": m, "x0": x0, "warmup": warmup,
            "horizon": horizon, "rhs": rhs, "divergence": divergence}


def _run_task(task: dict) -> dict:
    g = _graph(task["spec"])
    cfg = ProcessConfig(model=task["model"], beta=task["beta"], m=task["m"],
                        initial_load=task["x0"], seed=task["seed"], horizon=task["horizon"],
                        rm_probability=task["rm_p"], checkpoints=task["checkpoints"])
    circuit = build_circuit(g, task["scheme"]) if task["model"] == "sync_circuit" else None
    _, _, met = run(cfg, g, circuit)
    return {"cell": task["cell"], "run": task["run"], "seed": task["seed"], "rows": met.rows()}


def _regress(ns: np.ndarray, meds: np.ndarray) -> tuple[float | None, tuple | None, float | None]:
    ok = meds > 0
    if ok.sum() < 2:
        return None, None, None
    lx, ly = np.log(ns[ok]), np.log(meds[ok])
    fit = stats.linregress(lx, ly)
    if ok.sum() > 2:
        q = stats.t.ppf(0.975, ok.sum() - 2)
        ci = (float(fit.slope - q * fit.stderr), float(fit.slope + q * fit.stderr))
    else:
        ci = None
    return float(fit.slope), ci, float(fit.intercept)


def run_sweep(config: ExperimentConfig, workers: int | None = None,
              sink: Callable[[list[dict]], None] | None = None
              ) -> tuple[ScalingResult, list[dict]]:
    """Execute every (size, run) cell; returns the scaling summary and CSV rows.

    ``sink`` receives each finished run's rows as soon as it is available, so a
    failure later in the sweep leaves the earlier rows written.
    """
    setups = [_cell_setup(config, s) for s in config.sizes]
    tasks = []
    for ci, st in enumerate(setups):
        for r in range(config.runs):
            tasks.append({
                "cell": ci, "run": r, "seed": run_seed(config.seed, ci, r), "spec": st["spec"],
                "model": config.model, "beta": config.beta, "m": st["m"], "x0": st["x0"],
                "horizon": st["horizon"], "rm_p": config.rm_probability,
                "checkpoints": config.checkpoints, "scheme": config.circuit_scheme,
            })
    rows: list[dict] = []
    finals: dict[int, list[dict]] = {i: [] for i in range(len(setups))}
    for res in pool_imap(_run_task, tasks, workers):
        st = setups[res["cell"]]
        g = st["g"]
        run_id = res["cell"] * config.runs + res["run"]
        new = []
        for rec in res["rows"]:
            new.append({
                "run_id": run_id, "seed": res["seed"], "family": g.family, "n": g.n, "d": g.d,
                "model": config.model, "beta": config.beta, "m": st["m"], "t": rec["t"],
                "disc": rec["disc"], "disc_init": rec["disc_init"], "disc_dyn": rec["disc_dyn"],
                "disc_round": rec["disc_round"], "phi": rec["phi"], "max_dev": rec["max_dev"],
                "bound_rhs": st["rhs"],
            })
        rows.extend(new)
        if sink is not None:
            sink(new)
        finals[res["cell"]].append(res["rows"][-1])
    cells = []
    for ci, st in enumerate(setups):
        g = st["g"]
        fin = finals[ci]
        disc = np.array([f["disc"] for f in fin])
        cells.append(CellSummary(
            size=config.sizes[ci], n=g.n, d=g.d, m=st["m"], runs=len(fin), horizon=st["horizon"],
            warmup=st["warmup"], bound_rhs=st["rhs"],
            prediction=class_prediction(g.family, config.model, g.n, st["m"], g.params.get("r")),
            median=float(np.median(disc)), mean=float(disc.mean()),
            p95=float(np.percentile(disc, 95)),
            median_init=float(np.median([f["disc_init"] for f in fin])),
            median_dyn=float(np.median([f["disc_dyn"] for f in fin])),
            median_round=float(np.median([f["disc_round"] for f in fin])),
            divergence=st["divergence"],
        ))
    ns = np.array([c.n for c in cells], dtype=float)
    meds = np.array([c.median for c in cells])
    slope, ci95, icpt = _regress(ns, meds)
    preds = np.array([c.prediction if c.prediction else np.nan for c in cells])
    pslope = _regress(ns, preds)[0] if np.all(np.isfinite(preds)) and len(cells) > 1 else None
    ratio_log = meds / np.log(ns)
    ratio_rhs = meds / np.array([c.bound_rhs for c in cells])
    fam = config.graph["family"]
    result = ScalingResult(
        family=fam, model=config.model, cells=cells, slope=slope, slope_ci=ci95, intercept=icpt,
        predicted_exponent=leading_exponent(fam, config.model, config.m),
        predicted_slope=pslope,
        log_ratio_drift=_drift(ratio_log),
        rhs_ratio_drift=_drift(ratio_rhs),
    )
    return result, rows


def _drift(vals: np.ndarray) -> float:
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0 or np.any(vals <= 0):
        return math.inf if vals.size else 1.0
    return float(vals.max() / vals.min())


class CsvSink:
    """Streams rows in the fixed column order, flushing after every batch."""

    def __init__(self, path: Path) -> None:
        self._fh = open(path, "w", newline="")
        self._w = csv.DictWriter(self._fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        self._w.writeheader()

    def __call__(self, rows: Iterable[dict]) -> None:
        for row in rows:
            self._w.writerow({k: _fmt(row[k]) for k in CSV_COLUMNS})
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def write_csv(rows: Iterable[dict], path: Path) -> None:
    sink = CsvSink(path)
    try:
        sink(rows)
    finally:
        sink.close()


def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    return v


def write_sweep(config: ExperimentConfig, out: Path, workers: int | None = None) -> ScalingResult:
    out.mkdir(parents=True, exist_ok=True)
    sink = CsvSink(out / "sweep.csv")
    try:
        result, _ = run_sweep(config, workers, sink)
    finally:
        sink.close()
    with open(out / "summary.json", "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, default=_json_default)
    if config.plot:
        from .plotting import plot_scaling

        plot_scaling(result, out / "disc_vs_n.svg")
    return result


def _json_default(o: Any) -> Any:
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


@dataclass
class MemorylessnessConfig:
    graph: dict
    model: str = "sync_random"
    per_node_K: list[int] = field(default_factory=lambda: [8])
    runs: int = 20
    beta: float = 1.0
    threshold: float = 2.0
    max_multiple: float = 50.0
    seed: int = 0
    node: int = 0
    rm_probability: float | None = None
    circuit_scheme: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "MemorylessnessConfig":
        allowed = set(cls.__dataclass_fields__)
        extra = set(data) - allowed - {"kind"}
        if extra:
            raise InvalidSpec(f"unknown memorylessness config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items() if k in allowed})


def _memo_task(task: dict) -> int | None:
    g = _graph(task["spec"])
    x0 = np.zeros(g.n, dtype=np.int64)
    x0[task["node"]] = task["load"]
    cfg = ProcessConfig(model=task["model"], beta=task["beta"], m=0, initial_load=x0,
                        seed=task["seed"], discrete=False, rm_probability=task["rm_p"])
    circuit = build_circuit(g, task["scheme"]) if task["model"] == "sync_circuit" else None
    return first_balanced_time(cfg, g, task["threshold"], task["max_steps"], circuit)


def memorylessness_experiment(config: MemorylessnessConfig, workers: int | None = None) -> dict:
    """Time for the initial-load contribution to fall below the threshold.

    The initial profile puts K*n items on one node. The time unit is
    ln(K n)/(lambda beta) for random matchings and period/lambda(R) * ln(K n) for
    circuits; ``C`` is the first balanced time in those units.
    """
    if config.model not in ("sync_random", "sync_circuit"):
        raise InvalidSpec("memorylessness experiment supports the synchronous models")
    g = _graph(config.graph)
    out: dict[str, Any] = {"graph": g.name, "model": config.model, "threshold": config.threshold,
                           "cells": []}
    if config.model == "sync_circuit":
        circuit = build_circuit(g, config.circuit_scheme)
        lam_r = round_matrix_gap(circuit, g.n)
        out["period"] = circuit.period
        out["lambda_round"] = lam_r
    else:
        lam = analyze(g).lambda_gap
        out["lambda_gap"] = lam
    for ki, K in enumerate(config.per_node_K):
        load = int(K) * g.n
        if config.model == "sync_circuit":
            unit = circuit.period / lam_r * math.log(K * g.n)
        else:
            unit = math.log(K * g.n) / (lam * config.beta)
        tasks = [{"spec": config.graph, "node": config.node, "load": load, "model": config.model,
                  "beta": config.beta, "seed": run_seed(config.seed, ki, r),
                  "rm_p": config.rm_probability, "scheme": config.circuit_scheme,
                  "threshold": config.threshold,
                  "max_steps": int(math.ceil(config.max_multiple * unit))}
                 for r in range(config.runs)]
        times = pool_map(_memo_task, tasks, workers)
        reached = [t for t in times if t is not None]
        cs = np.array(reached, dtype=float) / unit
        cell = {"K": int(K), "unit": unit, "runs": config.runs, "reached": len(reached),
                "times": [None if t is None else int(t) for t in times],
                "C_max": float(cs.max()) if len(reached) == config.runs else math.inf,
                "C_median": float(np.median(cs)) if reached.__len__() else math.inf}
        cell["smallest_multiple"] = (int(math.ceil(cell["C_max"]))
                                     if math.isfinite(cell["C_max"]) else None)
        out["cells"].append(cell)
    cmax = [c["C_max"] for c in out["cells"]]
    out["C_drift"] = _drift(np.array(cmax)) if all(math.isfinite(c) for c in cmax) else math.inf
    if config.model == "sync_circuit":
        # one full period from the adversarial start, checked exactly
        x0 = np.zeros(g.n, dtype=np.int64)
        x0[config.node] = int(config.per_node_K[0]) * g.n
        cfg = ProcessConfig(model="sync_circuit", m=0, initial_load=x0, horizon=circuit.period,
                            discrete=False, checkpoints=[])
        st, _, _ = run(cfg, g, circuit)
        out["disc_after_one_period"] = float(np.ptp(st.X_init))
    return out


@dataclass
class LowerBoundConfig:
    graph: dict
    m: int | str = "threshold"
    runs: int = 200
    horizon: int | None = None
    constant: float = 0.1
    pass_fraction: float = 0.05
    seed: int = 0
    circuit_scheme: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "LowerBoundConfig":
        allowed = set(cls.__dataclass_fields__)
        extra = set(data) - allowed - {"kind"}
        if extra:
            raise InvalidSpec(f"unknown lower-bound config keys: {sorted(extra)}")
        return cls(**{k: v for k, v in data.items() if k in allowed})


def _lower_task(task: dict) -> float:
    g = _graph(task["spec"])
    cfg = ProcessConfig(model="sync_circuit", m=task["m"], seed=task["seed"],
                        horizon=task["horizon"], checkpoints=[])
    _, _, met = run(cfg, g, build_circuit(g, task["scheme"]))
    return met.disc[-1]


def lower_bound_experiment(config: LowerBoundConfig, workers: int | None = None) -> dict:
    """Fraction of circuit runs whose discrepancy reaches constant * sqrt(m/n) * divergence."""
    g = _graph(config.graph)
    circuit = build_circuit(g, config.circuit_scheme)
    horizon = g.n**2 if config.horizon is None else int(config.horizon)
    div = global_divergence(ReplayLog.for_circuit(circuit, horizon), g).max_value
    m_min = 4 * g.n * math.log(g.n) / div
    m = int(math.ceil(m_min)) if config.m == "threshold" else int(config.m)
    if m < m_min:
        raise ThresholdNotMet(f"m={m} is below the threshold {m_min:.2f}")
    target = config.constant * math.sqrt(m / g.n) * div
    tasks = [{"spec": config.graph, "m": m, "seed": run_seed(config.seed, 0, r),
              "horizon": horizon, "scheme": config.circuit_scheme} for r in range(config.runs)]
    discs = np.array(pool_map(_lower_task, tasks, workers))
    frac = float(np.mean(discs >= target))
    return {"graph": g.name, "scheme": circuit.scheme, "horizon": horizon, "divergence": div,
            "class_divergence_sq": class_divergence_sq(g, circuit), "m_threshold": m_min,
            "m": m, "target": target, "runs": config.runs, "fraction": frac,
            "median_disc": float(np.median(discs)), "passed": frac >= config.pass_fraction}
