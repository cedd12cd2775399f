"""Command line entry point: ``matchbal <command> --config FILE --seed N --out DIR``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import bounds as B
from .drift import DriftChainSpec, verify_on_potential_chain, verify_statement1, verify_statement2
from .errors import MatchbalError
from .experiments import (ExperimentConfig, LowerBoundConfig, MemorylessnessConfig, write_csv,
                          lower_bound_experiment, memorylessness_experiment, write_sweep)
from .graphs import generate
from .matchings import build_circuit
from .metrics import divergence_nodes, global_divergence, goodness_check
from .process import ProcessConfig, ReplayLog, run
from .spectral import analyze

COMMANDS = ("simulate", "analyze", "divergence", "goodness", "bounds", "check-drift", "sweep")


def _jsonable(o: Any) -> Any:
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, np.generic):
        return _jsonable(o.item())
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def _emit(report: dict, out: Path | None, name: str) -> None:
    text = json.dumps(_jsonable(report), indent=2)
    print(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")


def _process_config(cfg: dict, seed: int, n: int) -> ProcessConfig:
    x0 = cfg.get("initial_load")
    if isinstance(x0, dict):
        vec = np.zeros(n, dtype=np.int64)
        vec[int(x0.get("node", 0))] = int(x0["per_node"]) * n if "per_node" in x0 else int(x0["total"])
        x0 = vec
    m = cfg.get("m", 1)
    return ProcessConfig(
        model=cfg.get("model", "sync_random"), beta=float(cfg.get("beta", 1.0)),
        m=n if m == "n" else int(m), initial_load=x0, seed=seed,
        horizon=int(cfg.get("horizon", 1000)), discrete=bool(cfg.get("discrete", True)),
        rm_probability=cfg.get("rm_probability"), record_log=bool(cfg.get("record_log", False)),
        checkpoints=cfg.get("checkpoints", "pow2"),
    )


def cmd_simulate(cfg: dict, seed: int, out: Path | None) -> dict:
    g = generate(cfg["graph"])
    pc = _process_config(cfg, seed, g.n)
    circuit = build_circuit(g, cfg.get("circuit_scheme")) if pc.model == "sync_circuit" else None
    state, log, met = run(pc, g, circuit)
    report = {"graph": g.name, "model": pc.model, "n": g.n, "d": g.d, "t": state.t,
              "seed": seed, "final": met.last()}
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"run_id": 0, "seed": seed, "family": g.family, "n": g.n, "d": g.d,
                 "model": pc.model, "beta": pc.beta, "m": pc.m, "bound_rhs": "", **r}
                for r in met.rows()]
        write_csv(rows, out / "metrics.csv")
        if log is not None:
            log.write(out / "replay.log")
        from .plotting import plot_series

        plot_series(met, out / "metrics.svg", title=f"{g.name} / {pc.model}")
    return report


def cmd_analyze(cfg: dict, seed: int, out: Path | None) -> dict:
    return analyze(generate(cfg["graph"])).to_dict()


def cmd_divergence(cfg: dict, seed: int, out: Path | None) -> dict:
    g = generate(cfg["graph"])
    beta = float(cfg.get("beta", 1.0))
    if "log" in cfg:
        log = ReplayLog.read(cfg["log"], g.n, beta)
        deviation = None
    elif cfg.get("model", "sync_circuit") == "sync_circuit":
        log = ReplayLog.for_circuit(build_circuit(g, cfg.get("circuit_scheme")),
                                    int(cfg.get("horizon", g.n * g.n)))
        deviation = None
    else:
        pc = _process_config({**cfg, "record_log": True}, seed, g.n)
        state, log, _ = run(pc, g)
        deviation = state.X - state.X.mean()
    if "nodes" in cfg:
        nodes, sampled = np.asarray(cfg["nodes"], dtype=np.int64), True
    else:
        nodes, sampled = divergence_nodes(g.n, deviation, np.random.default_rng(seed),
                                          limit=int(cfg.get("node_limit", 256)),
                                          sample=int(cfg.get("sample", 16)))
    res = global_divergence(log, g, beta, k=nodes)
    return {"graph": g.name, "t": res.t, "divergence": res.max_value,
            "divergence_sq": res.max_value**2, "argmax_node": int(nodes[np.argmax(res.per_node)]),
            "nodes_evaluated": int(nodes.size), "sampled": bool(sampled or res.sampled),
            "max_row_potential_increase": res.max_increase}


def cmd_goodness(cfg: dict, seed: int, out: Path | None) -> dict:
    g = generate(cfg["graph"])
    rep = goodness_check(g, cfg.get("distribution", "RM"), int(cfg.get("samples", 100_000)),
                         np.random.default_rng(seed), dirichlet=cfg.get("dirichlet"),
                         p=cfg.get("rm_probability"))
    return {"graph": g.name, **rep.to_dict()}


def cmd_bounds(cfg: dict, seed: int, out: Path | None) -> dict:
    g = generate(cfg["graph"])
    a = analyze(g)
    m = cfg.get("m", 1)
    params = B.BoundParams(gamma=float(cfg.get("gamma", 2.0)), K=float(cfg.get("K", 1.0)),
                           m=g.n if m == "n" else int(m), beta=float(cfg.get("beta", 1.0)),
                           constant_c=float(cfg.get("c", 1.0)))
    rep: dict[str, Any] = {"graph": g.name, "analytics": a.to_dict()}
    w, b = B.sync_bound(g, a, params)
    rep["random_matching"] = {"warmup": w, "disc_bound": b,
                              "integral_x_over_g": B.integral_x_over_g(g, a, "RM"),
                              "sigma_sq": B.sigma_sq(g, a, "RM")}
    w, b = B.async_bound(g, a, params)
    rep["single_edge"] = {"warmup": w, "disc_bound": b,
                          "integral_x_over_g": B.integral_x_over_g(g, a, "SE"),
                          "sigma_sq": B.sigma_sq(g, a, "SE")}
    rep["rounding_bound"] = B.rounding_bound(g.n, params.gamma, params.beta)
    try:
        circuit = build_circuit(g, cfg.get("circuit_scheme"))
    except MatchbalError:
        circuit = None
    if circuit is not None:
        lam_r = B.round_matrix_gap(circuit, g.n)
        horizon = int(cfg.get("horizon", g.n * g.n))
        div = global_divergence(ReplayLog.for_circuit(circuit, horizon), g).max_value
        w, b = B.circuit_bound(g, circuit, div, params, lam_r)
        rep["circuit"] = {"scheme": circuit.scheme, "period": circuit.period,
                          "lambda_round": lam_r, "divergence": div, "warmup": w, "disc_bound": b,
                          "class_divergence_sq": B.class_divergence_sq(g, circuit, lam_r),
                          "lower": B.circuit_lower(params, div, g.n)}
    return rep


def cmd_check_drift(cfg: dict, seed: int, out: Path | None) -> dict:
    rng = np.random.default_rng(seed)
    if "potential" in cfg:
        pc = dict(cfg["potential"])
        g = generate(pc.pop("graph"))
        return {"graph": g.name, **verify_on_potential_chain(g, rng=rng, **pc).to_dict()}
    spec = DriftChainSpec.from_dict(cfg["chain"])
    runs = int(cfg.get("runs", 10_000))
    s1 = verify_statement1(spec, runs, int(cfg.get("t", max(1, int(spec.t0)))), rng)
    s2 = verify_statement2(spec, runs, rng)
    return {"t0": spec.t0, "statement1": s1.to_dict(), "statement2": s2.to_dict(),
            "passed": s1.passed and s2.passed}


def cmd_sweep(cfg: dict, seed: int, out: Path | None) -> dict:
    kind = cfg.get("kind", "scaling")
    out = Path("sweep_out") if out is None else out
    if kind == "memorylessness":
        mc = MemorylessnessConfig.from_dict({**cfg, "seed": seed})
        return memorylessness_experiment(mc)
    if kind == "lower_bound":
        return lower_bound_experiment(LowerBoundConfig.from_dict({**cfg, "seed": seed}))
    if kind != "scaling":
        raise MatchbalError(f"unknown sweep kind {kind!r}")
    ec = ExperimentConfig.from_dict({**cfg, "seed": seed})
    return write_sweep(ec, out).to_dict()


HANDLERS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "divergence": cmd_divergence,
            "goodness": cmd_goodness, "bounds": cmd_bounds, "check-drift": cmd_check_drift,
            "sweep": cmd_sweep}
OUTPUT_NAMES = {"sweep": "report.json"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matchbal", description=__doc__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="JSON config document")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"matchbal: cannot read config: {exc}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
    cfg.pop("seed", None)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("matchbal: seed must be a u64", file=sys.stderr)
        return 2
    try:
        report = HANDLERS[args.command](cfg, seed, args.out)
    except (MatchbalError, KeyError, TypeError, ValueError) as exc:
        print(f"matchbal: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _emit(report, args.out, OUTPUT_NAMES.get(args.command, f"{args.command.replace('-', '_')}.json"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
