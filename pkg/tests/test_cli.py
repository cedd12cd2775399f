import json

import pytest

from matchbal.cli import main


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_analyze_prints_fixed_keys(tmp_path, capsys):
    p = _write(tmp_path, "a.json", {"graph": {"family": "cycle", "n": 4}})
    assert main(["analyze", "--config", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert list(out) == ["lambda_gap", "res_diam", "res_star", "t_hit", "t_even", "T_of_G", "n", "d"]
    assert out["lambda_gap"] == pytest.approx(1.0) and out["t_even"] == pytest.approx(3.0)


def test_simulate_writes_outputs(tmp_path, capsys):
    p = _write(tmp_path, "s.json", {"graph": {"family": "torus", "r": 2, "k": 4},
                                    "model": "sync_random", "m": "n", "horizon": 50,
                                    "record_log": True})
    assert main(["simulate", "--config", str(p), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["t"] == 50 and rep["seed"] == 3
    for name in ("metrics.csv", "metrics.svg", "replay.log", "simulate.json"):
        assert (tmp_path / "o" / name).exists()
    lines = (tmp_path / "o" / "replay.log").read_text().splitlines()
    assert len(lines) == 50 and lines[0].startswith("1 ")


def test_divergence_goodness_bounds_drift(tmp_path, capsys):
    cfgs = {
        "divergence": {"graph": {"family": "cycle", "n": 8}, "horizon": 64},
        "goodness": {"graph": {"family": "cycle", "n": 4}, "distribution": "SE"},
        "bounds": {"graph": {"family": "hypercube", "r": 3}, "m": "n", "horizon": 24},
        "check-drift": {"chain": {"x0": 1.0, "h": {"kind": "linear", "a": 0.5}, "sigma": 0.5},
                        "runs": 20},
    }
    for cmd, cfg in cfgs.items():
        p = _write(tmp_path, f"{cmd}.json", cfg)
        assert main([cmd, "--config", str(p), "--seed", "1"]) == 0, cmd
        rep = json.loads(capsys.readouterr().out)
        if cmd == "divergence":
            assert rep["nodes_evaluated"] == 8 and not rep["sampled"]
        elif cmd == "goodness":
            assert rep["verdict"] == {"drop": "pass", "variance": "pass"}
        elif cmd == "bounds":
            assert rep["circuit"]["lambda_round"] == pytest.approx(1.0)
            assert set(rep) >= {"random_matching", "single_edge", "rounding_bound"}
        else:
            assert rep["passed"]


def test_sweep_command(tmp_path, capsys):
    p = _write(tmp_path, "w.json", {"graph": {"family": "cycle"}, "sizes": [8, 16],
                                    "model": "sync_random", "runs": 2, "horizon": {"steps": 16},
                                    "seed": 4})
    assert main(["sweep", "--config", str(p), "--out", str(tmp_path / "w")]) == 0
    capsys.readouterr()
    for name in ("sweep.csv", "summary.json", "disc_vs_n.svg", "report.json"):
        assert (tmp_path / "w" / name).exists()


def test_errors_exit_nonzero(tmp_path, capsys):
    p = _write(tmp_path, "bad.json", {"graph": {"family": "cycle", "n": 2}})
    assert main(["analyze", "--config", str(p)]) == 1
    assert "InvalidSpec" in capsys.readouterr().err
    assert main(["analyze", "--config", str(tmp_path / "missing.json")]) == 2
