#!/usr/bin/env python3
"""Run the benchmark experiment battery and collect CSV outputs.

Generates the standard comparison data: a convergence run of the learned
policy with and without function sharing (plus greedy baselines), and
the three parameter sweeps (system capacity, share cap, class-3 revenue).
Figures are rendered separately by the plotkit package from the CSVs
this script writes.

Desk-scale defaults keep the full battery under an hour; pass --quick
for a minutes-scale smoke version.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from metaslice.agent import StateEncoder, TrainConfig, train
from metaslice.cli import main as cli_main
from metaslice.config import ScenarioConfig
from metaslice.metrics import write_csv
from metaslice.simulation import AdmissionSimulator


def convergence_runs(out: Path, steps: int, seeds: list[int]):
    """Learning curves for the learned policy with and without sharing."""
    rows = []
    for variant, sharing in (("imsac+mit", True), ("imsac", False)):
        for seed in seeds:
            scenario = ScenarioConfig(sharing_enabled=sharing, seed=seed)
            cfg = TrainConfig(steps=steps, target_sync_every=2_500,
                              epsilon_decay_steps=int(steps * 0.7),
                              eval_every=max(steps // 12, 1), eval_arrivals=3_000,
                              seed=seed)
            result = train(AdmissionSimulator(scenario, seed=seed), cfg)
            rows += [[variant, seed, p.step, p.eval_average_reward, p.epsilon]
                     for p in result.curve]
    write_csv(out / "convergence.csv",
              ["variant", "seed", "step", "eval_average_reward", "epsilon"],
              rows, label="curve")


def sweep(out: Path, name: str, spec: dict):
    path = out / f"{name}.json"
    path.write_text(json.dumps(spec, indent=2))
    code = cli_main(["sweep", "--sweep", str(path), "--out", str(out / name)])
    if code != 0:
        raise SystemExit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    steps = 8_000 if args.quick else 60_000
    seeds = [0] if args.quick else [0, 1, 2]
    eval_arrivals = 4_000 if args.quick else 20_000
    train_section = {"steps": steps, "target_sync_every": 2_500,
                     "epsilon_decay_steps": int(steps * 0.7), "eval_every": 0}

    convergence_runs(out, steps, seeds)

    base = {"num_classes": 3, "arrival_rates": [60.0, 40.0, 25.0],
            "departure_rates": [2.0, 2.0, 2.0], "class_rewards": [1.0, 2.0, 4.0],
            "share_cap": 8, "seed": 0}
    sweep(out, "capacity", {
        "scenario": {**base, "capacity": [1200.0, 1200.0, 1200.0]},
        "train": train_section,
        "parameter": "capacity",
        "values": [10, 19, 28, 37, 46, 55] if not args.quick else [10, 30],
        "seeds": seeds, "eval_arrivals": eval_arrivals,
    })
    sweep(out, "share_cap", {
        "scenario": {**base, "capacity": [1200.0, 1200.0, 1200.0]},
        "train": train_section,
        "parameter": "share_cap",
        "values": [1, 3, 5, 8, 11, 15] if not args.quick else [1, 8],
        "seeds": seeds,
        "variants": ["greedy+mit", "imsac+mit"],
        "eval_arrivals": eval_arrivals,
    })
    sweep(out, "r3", {
        # revenue sweep runs at low capacity with weights scaled to it, so
        # the immediate margin separates cheap and premium admissions
        "scenario": {**base, "capacity": [400.0, 400.0, 400.0],
                     "arrival_rates": [60.0, 50.0, 40.0],
                     "resource_weights": [1 / 400, 1 / 400, 1 / 400]},
        "train": train_section,
        "parameter": "r3",
        "values": [1, 2, 4, 6, 8, 10] if not args.quick else [1, 10],
        "seeds": seeds,
        "variants": ["greedy", "greedy+mit", "imsac", "imsac+mit"],
        "eval_arrivals": eval_arrivals,
    })
    print(f"all outputs in {out}/")


if __name__ == "__main__":
    main()
