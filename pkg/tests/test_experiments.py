import csv
import json
import math

import numpy as np
import pytest

from matchbal import experiments as X
from matchbal.errors import InvalidSpec, ThresholdNotMet


def _cfg(**kw):
    base = dict(graph={"family": "cycle"}, sizes=[8, 16, 32, 64], model="sync_random", m="n",
                horizon={"steps": 64}, runs=3, seed=5)
    base.update(kw)
    return X.ExperimentConfig(**base)


def test_csv_columns_and_determinism(tmp_path):
    cfg = _cfg()
    X.write_sweep(cfg, tmp_path / "a", workers=1)
    X.write_sweep(cfg, tmp_path / "b", workers=2)
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    with open(tmp_path / "a" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == X.CSV_COLUMNS
    # 4 sizes x 3 runs x checkpoints {0,1,2,4,...,64}
    assert len(rows) == 4 * 3 * 8
    assert (tmp_path / "a" / "disc_vs_n.svg").read_text().lstrip().startswith("<?xml")
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["family"] == "cycle" and len(summary["cells"]) == 4


def test_zero_horizon_sweep_keeps_initial_discrepancy():
    res, rows = X.run_sweep(_cfg(horizon={"steps": 0}, initial_load={"total": 40}), workers=1)
    assert all(c.median == 40 for c in res.cells)
    assert {r["t"] for r in rows} == {0}


def test_scaling_result_fields():
    res, _ = X.run_sweep(_cfg(model="async_single", m=1, horizon={"warmup_multiple": 1.0},
                              sizes=[8, 12, 16, 24]), workers=1)
    assert res.slope is not None and res.slope_ci[0] <= res.slope <= res.slope_ci[1]
    assert res.predicted_exponent == 0.5
    assert all(c.bound_rhs > 0 and c.prediction > 0 for c in res.cells)
    assert res.log_ratio_drift >= 1 and res.rhs_ratio_drift >= 1


def test_circuit_cells_record_divergence():
    res, _ = X.run_sweep(X.ExperimentConfig(graph={"family": "hypercube"}, sizes=[3, 4],
                                            model="sync_circuit", runs=2,
                                            horizon={"steps": 32}), workers=1)
    assert all(c.divergence is not None and c.divergence > 0 for c in res.cells)


def test_partial_csv_on_failure(tmp_path, monkeypatch):
    real = X._run_task

    def flaky(task):
        if task["cell"] == 1:
            raise RuntimeError("boom")
        return real(task)

    monkeypatch.setattr(X, "_run_task", flaky)
    with pytest.raises(RuntimeError):
        X.write_sweep(_cfg(), tmp_path, workers=1)
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * 8 and {r["n"] for r in rows} == {"8"}


def test_class_predictions():
    n, ln = 256, math.log(256)
    assert X.class_prediction("cycle", "async_single", n, 1) == pytest.approx(math.sqrt(n * ln))
    assert X.class_prediction("cycle", "sync_random", n, n) == pytest.approx(ln + math.sqrt(n * ln))
    assert X.class_prediction("torus", "async_single", n, 1, 2) == pytest.approx(ln**1.5)
    assert X.class_prediction("torus", "sync_circuit", n, n, 2) == pytest.approx(2 * ln)
    assert X.class_prediction("torus", "sync_circuit", n, n, 3) == pytest.approx(ln + math.sqrt(ln))
    assert X.class_prediction("hypercube", "async_single", n, 1) == pytest.approx(ln)
    assert X.class_prediction("complete", "async_single", n, 1) is None


def test_run_seed_is_stable():
    assert X.run_seed(1, 0, 0) == X.run_seed(1, 0, 0)
    assert len({X.run_seed(1, c, r) for c in range(4) for r in range(50)}) == 200
    assert 0 <= X.run_seed(2**63, 3, 4) < 2**63


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("MATCHBAL_THREADS", "3")
    assert X.worker_count() == 3


@pytest.mark.parametrize("kw", [{"sizes": [16, 8]}, {"runs": 0}, {"m": "half"},
                                {"horizon": {"steps": 1, "warmup_multiple": 2}},
                                {"graph": {"family": "petersen"}}])
def test_invalid_experiment_configs(kw):
    with pytest.raises(InvalidSpec):
        _cfg(**kw)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(InvalidSpec):
        X.ExperimentConfig.from_dict({"graph": {"family": "cycle"}, "sizes": [8], "colour": 1})


def test_memorylessness_hypercube_circuit():
    rep = X.memorylessness_experiment(X.MemorylessnessConfig(
        graph={"family": "hypercube", "r": 3}, model="sync_circuit", per_node_K=[8, 64],
        runs=2, threshold=0.0), workers=1)
    assert rep["disc_after_one_period"] == 0.0
    assert all(c["times"] == [3, 3] for c in rep["cells"])


def test_memorylessness_rm_small():
    rep = X.memorylessness_experiment(X.MemorylessnessConfig(
        graph={"family": "cycle", "n": 16}, per_node_K=[8, 64], runs=4, threshold=1.0),
        workers=1)
    assert all(c["reached"] == 4 for c in rep["cells"])
    assert math.isfinite(rep["C_drift"])


def test_lower_bound_refuses_small_m():
    with pytest.raises(ThresholdNotMet):
        X.lower_bound_experiment(X.LowerBoundConfig(graph={"family": "cycle", "n": 16}, m=5,
                                                    runs=4))


def test_lower_bound_small_cycle():
    rep = X.lower_bound_experiment(X.LowerBoundConfig(graph={"family": "cycle", "n": 16},
                                                      runs=20, seed=1), workers=1)
    assert rep["m"] >= rep["m_threshold"] and rep["passed"]
