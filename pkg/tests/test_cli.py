import json
from pathlib import Path

import numpy as np
import pytest

from metaslice.cli import main
from metaslice.metrics import read_csv

TINY_SCENARIO = {
    "num_classes": 1,
    "capacity": [240.0, 240.0, 240.0],
    "arrival_rates": [2.0],
    "departure_rates": [1.0],
    "class_rewards": [1.0],
    "resource_weights": [0.0, 0.0, 0.0],
    "sharing_enabled": False,
    "horizon_arrivals": 500,
    "seed": 0,
}


def write_config(tmp_path, name="cfg.json", scenario=None, train=None, extra=None):
    data = {"scenario": scenario or dict(TINY_SCENARIO)}
    if train is not None:
        data["train"] = train
    if extra:
        data.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestTrainCommand:
    def test_smoke_run_row_count(self, tmp_path):
        cfg = write_config(tmp_path, train={"steps": 10, "eval_every": 5,
                                            "eval_arrivals": 50})
        out = tmp_path / "out"
        assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv(out / "curve.csv")
        assert header == ["step", "eval_average_reward", "epsilon"]
        assert len(rows) == 2  # steps 5 and 10
        assert (out / "checkpoint.ckpt").exists()

    def test_deterministic_outputs(self, tmp_path):
        cfg = write_config(tmp_path, train={"steps": 30, "eval_every": 10,
                                            "eval_arrivals": 100})
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["train", "--config", str(cfg), "--out", str(out1)])
        main(["train", "--config", str(cfg), "--out", str(out2)])
        assert (out1 / "curve.csv").read_bytes() == (out2 / "curve.csv").read_bytes()
        assert (out1 / "checkpoint.ckpt").read_bytes() == \
               (out2 / "checkpoint.ckpt").read_bytes()

    def test_bad_config_names_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, scenario={**TINY_SCENARIO, "bogus_field": 3})
        code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--iterations", "5"])
        assert code == 2
        assert "bogus_field" in capsys.readouterr().err

    def test_missing_steps_diagnosed(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "train.steps" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_greedy_metrics_row(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["evaluate", "--config", str(cfg), "--policy", "greedy",
                     "--arrivals", "2000", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out / "metrics.csv")
        assert rows and len(rows) == 1
        row = dict(zip(header, rows[0]))
        assert float(row["acceptance_prob"]) == pytest.approx(0.6, abs=0.1)
        assert (out / "system_state.json").exists()
        snapshot = json.loads((out / "system_state.json").read_text())
        assert snapshot["capacity"] == [240.0, 240.0, 240.0]

    def test_missing_checkpoint_for_learned_policy(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        code = main(["evaluate", "--config", str(cfg), "--policy", "imsac",
                     "--out", str(tmp_path / "o")])
        assert code == 2
        assert "checkpoint" in capsys.readouterr().err


class TestSweepCommand:
    def test_baseline_sweep_rows(self, tmp_path):
        sweep = write_config(tmp_path, "sweep.json", extra={
            "parameter": "capacity",
            "values": [2, 3],
            "seeds": [0, 1],
            "variants": ["greedy", "greedy+mit"],
            "eval_arrivals": 400,
        })
        out = tmp_path / "out"
        assert main(["sweep", "--sweep", str(sweep), "--out", str(out)]) == 0
        header, rows = read_csv(out / "sweep.csv")
        assert len(rows) == 2 * 2 * 2
        assert header[:4] == ["parameter", "value", "variant", "seed"]
        for row in rows:
            assert all(np.isfinite(float(v)) for v in row[3:])

    def test_sweep_is_reproducible(self, tmp_path):
        sweep = write_config(tmp_path, "sweep.json", extra={
            "parameter": "r3",
            "values": [1.0],
            "seeds": [0],
            "variants": ["greedy+mit"],
            "eval_arrivals": 300,
        })
        sweep_dict = json.loads(sweep.read_text())
        sweep_dict["scenario"]["num_classes"] = 3
        sweep_dict["scenario"]["arrival_rates"] = [60.0, 50.0, 40.0]
        sweep_dict["scenario"]["departure_rates"] = [2.0, 2.0, 2.0]
        sweep_dict["scenario"]["class_rewards"] = [1.0, 2.0, 4.0]
        sweep_dict["scenario"]["sharing_enabled"] = True
        sweep.write_text(json.dumps(sweep_dict))
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        main(["sweep", "--sweep", str(sweep), "--out", str(out1)])
        main(["sweep", "--sweep", str(sweep), "--out", str(out2)])
        assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()

    def test_parallel_workers_match_serial(self, tmp_path):
        sweep = write_config(tmp_path, "sweep.json", extra={
            "parameter": "capacity", "values": [2, 3], "seeds": [0],
            "variants": ["greedy"], "eval_arrivals": 300,
        })
        serial, parallel = tmp_path / "ser", tmp_path / "par"
        main(["sweep", "--sweep", str(sweep), "--out", str(serial)])
        main(["sweep", "--sweep", str(sweep), "--out", str(parallel),
              "--workers", "2"])
        assert (serial / "sweep.csv").read_bytes() == \
               (parallel / "sweep.csv").read_bytes()

    def test_imsac_sweep_requires_steps(self, tmp_path, capsys):
        sweep = write_config(tmp_path, "sweep.json", extra={
            "parameter": "share_cap", "values": [2], "seeds": [0],
            "variants": ["imsac+mit"],
        })
        assert main(["sweep", "--sweep", str(sweep), "--out", str(tmp_path / "o")]) == 2
        assert "train.steps" in capsys.readouterr().err


class TestOracleCommand:
    def test_tiny_instance_row(self, tmp_path):
        scenario = {**TINY_SCENARIO, "capacity": [120.0, 120.0, 120.0],
                    "arrival_rates": [1.0]}
        cfg = write_config(tmp_path, scenario=scenario)
        out = tmp_path / "out"
        assert main(["oracle", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv(out / "oracle.csv")
        row = dict(zip(header, rows[0]))
        assert float(row["optimal_gain_per_hour"]) == pytest.approx(0.5, abs=1e-6)
        assert float(row["erlang_blocking"]) == pytest.approx(0.5, abs=1e-12)

    def test_sharing_config_refused(self, tmp_path, capsys):
        cfg = write_config(tmp_path, scenario={**TINY_SCENARIO,
                                               "sharing_enabled": True})
        assert main(["oracle", "--config", str(cfg), "--out",
                     str(tmp_path / "o")]) == 2
        assert "sharing" in capsys.readouterr().err

    def test_too_large_config_names_state_count(self, tmp_path, capsys):
        scenario = {**TINY_SCENARIO, "num_classes": 3,
                    "arrival_rates": [60.0, 40.0, 25.0],
                    "departure_rates": [2.0, 2.0, 2.0],
                    "class_rewards": [1.0, 2.0, 4.0],
                    "capacity": [1200.0, 1200.0, 1200.0]}
        cfg = write_config(tmp_path, scenario=scenario)
        code = main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "o"),
                     "--max-states", "100"])
        assert code == 2
        assert "2002" in capsys.readouterr().err

    def test_repo_configs_parse(self):
        root = Path(__file__).resolve().parent.parent / "configs"
        for name in ("default.json", "tiny.json"):
            data = json.loads((root / name).read_text())
            assert "scenario" in data and "train" in data
