"""Command-line entry point: train, evaluate, sweep, oracle.

All commands read JSON configs and write CSV files with a schema-version
comment on the first line. Runs are deterministic under the configured
seeds; re-running a command with identical inputs reproduces identical
output files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .agent import StateEncoder, TrainConfig, evaluate_policy, train
from .config import ConfigError, ScenarioConfig
from .metrics import write_csv
from .nets import DuelingNet
from .oracle import (OracleEligibilityError, build_embedded_chain, check_oracle_eligible,
                     erlang_b, relative_value_iteration)
from .policies import ValueNetPolicy, make_baseline
from .simulation import AdmissionSimulator

VARIANTS = ("greedy", "greedy+mit", "imsac", "imsac+mit")
SWEEP_PARAMETERS = ("capacity", "share_cap", "r3")
EVAL_SEED_OFFSET = 10_000  # evaluation runs use seed + offset, away from training


def load_json(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def scenario_from_config(data: dict) -> ScenarioConfig:
    if "scenario" not in data:
        raise ConfigError("scenario: missing section")
    return ScenarioConfig.from_dict(data["scenario"])


def train_config_from(data: dict, iterations: int | None, seed: int | None) -> TrainConfig:
    section = dict(data.get("train", {}))
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"train.{sorted(unknown)[0]}: unknown field")
    if iterations is not None:
        section["steps"] = iterations
    if "steps" not in section:
        raise ConfigError("train.steps: required (or pass --iterations)")
    if seed is not None:
        section["seed"] = seed
    return TrainConfig(**section)


def apply_sweep_value(scenario: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    if parameter == "capacity":
        demand = np.asarray(scenario.function_demand)
        return scenario.replace(capacity=tuple(float(value) * demand))
    if parameter == "share_cap":
        return scenario.replace(share_cap=int(value))
    if parameter == "r3":
        rewards = list(scenario.class_rewards)
        rewards[-1] = float(value)
        return scenario.replace(class_rewards=tuple(rewards))
    raise ConfigError(f"parameter: expected one of {SWEEP_PARAMETERS}, got {parameter!r}")


def variant_scenario(scenario: ScenarioConfig, variant: str) -> ScenarioConfig:
    if variant not in VARIANTS:
        raise ConfigError(f"variants: expected subset of {VARIANTS}, got {variant!r}")
    return scenario.replace(sharing_enabled=variant.endswith("+mit"))


def _config_hash(scenario: ScenarioConfig, train_cfg: TrainConfig) -> str:
    payload = scenario.to_json() + json.dumps(asdict(train_cfg), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def train_or_load(scenario: ScenarioConfig, train_cfg: TrainConfig,
                  cache_dir: Path | None):
    """Train a network, reusing a cached checkpoint for identical configs."""
    encoder = StateEncoder(scenario)
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        path = cache_dir / f"{_config_hash(scenario, train_cfg)}.ckpt"
        if path.exists():
            return DuelingNet.load(path), encoder
    env = AdmissionSimulator(scenario, seed=train_cfg.seed)
    result = train(env, train_cfg)
    if cache_dir is not None:
        result.net.save(path)
    return result.net, result.encoder


def make_policy(name: str, scenario: ScenarioConfig, checkpoint: str | None):
    if name == "imsac":
        if checkpoint is None:
            raise ConfigError("checkpoint: required for the imsac policy")
        ckpt = Path(checkpoint)
        if not ckpt.exists():
            raise ConfigError(f"checkpoint: file not found: {ckpt}")
        net = DuelingNet.load(ckpt)
        if net.input_width != scenario.encoding_width:
            raise ConfigError(
                f"checkpoint: input width {net.input_width} does not match the "
                f"scenario encoding width {scenario.encoding_width}")
        return ValueNetPolicy(net, StateEncoder(scenario))
    return make_baseline(name)


# -- subcommands ------------------------------------------------------------


def cmd_train(args) -> int:
    data = load_json(args.config)
    scenario = scenario_from_config(data)
    train_cfg = train_config_from(data, args.iterations, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    env = AdmissionSimulator(scenario, seed=train_cfg.seed)
    result = train(env, train_cfg)
    result.net.save(out / "checkpoint.ckpt")
    rows = [[p.step, p.eval_average_reward, p.epsilon] for p in result.curve]
    write_csv(out / "curve.csv", ["step", "eval_average_reward", "epsilon"], rows,
              label="curve")
    print(f"trained {train_cfg.steps} steps; checkpoint and curve in {out}")
    return 0


def cmd_evaluate(args) -> int:
    data = load_json(args.config)
    scenario = scenario_from_config(data)
    if args.seed is not None:
        scenario = scenario.replace(seed=args.seed)
    policy = make_policy(args.policy, scenario, args.checkpoint)
    sim = AdmissionSimulator(scenario)
    arrivals = args.arrivals or scenario.horizon_arrivals
    report = sim.run_episode(policy, arrivals).report()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["policy", "sharing", "seed"] + report.columns()
    row = [args.policy, int(scenario.sharing_enabled), scenario.seed] + report.values()
    write_csv(out / "metrics.csv", header, [row], label="metrics")
    (out / "system_state.json").write_text(json.dumps(sim.manager.snapshot(), indent=2))
    print(f"{args.policy}: average_reward={report.average_reward:.4f} "
          f"acceptance={report.acceptance_prob:.4f} over {arrivals} arrivals")
    return 0


def sweep_point_rows(base: ScenarioConfig, train_section: dict, parameter: str,
                     value, variants, seeds, eval_arrivals: int, cache_dir: Path):
    """All CSV rows for one sweep point; independent across points."""
    rows = []
    point = apply_sweep_value(base, parameter, value)
    for variant in variants:
        scenario = variant_scenario(point, variant)
        for seed in seeds:
            if variant.startswith("imsac"):
                tc = TrainConfig(**{**train_section, "seed": seed})
                net, encoder = train_or_load(scenario, tc, cache_dir)
                policy = ValueNetPolicy(net, encoder)
            else:
                policy = make_baseline("greedy")
            report = evaluate_policy(policy, scenario, seed + EVAL_SEED_OFFSET,
                                     eval_arrivals)
            rows.append([parameter, value, variant, seed] + report.values())
    return rows


def cmd_sweep(args) -> int:
    data = load_json(args.sweep)
    base = scenario_from_config(data)
    parameter = data.get("parameter")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"parameter: expected one of {SWEEP_PARAMETERS}, got {parameter!r}")
    values = data.get("values")
    if not values:
        raise ConfigError("values: must be a non-empty list")
    seeds = data.get("seeds", list(range(data.get("num_seeds", 5))))
    if not seeds:
        raise ConfigError("seeds: must be non-empty")
    variants = data.get("variants", list(VARIANTS))
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"variants: unknown variant {v!r}")
    eval_arrivals = int(data.get("eval_arrivals", 20_000))
    train_section = dict(data.get("train", {}))
    needs_training = any(v.startswith("imsac") for v in variants)
    if needs_training and "steps" not in train_section:
        raise ConfigError("train.steps: required when sweeping imsac variants")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cache_dir = out / "cache"

    tasks = [(base, train_section, parameter, value, variants, seeds,
              eval_arrivals, cache_dir) for value in values]
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            per_point = list(pool.map(_sweep_star, tasks))
    else:
        per_point = [sweep_point_rows(*t) for t in tasks]

    rows = [row for point in per_point for row in point]
    sample = evaluate_policy(make_baseline("always_reject"),
                             base.replace(sharing_enabled=False), 0, 1)
    header = ["parameter", "value", "variant", "seed"] + sample.columns()
    write_csv(out / "sweep.csv", header, rows, label="sweep")
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return 0


def _sweep_star(task):
    return sweep_point_rows(*task)


def cmd_oracle(args) -> int:
    data = load_json(args.config)
    scenario = scenario_from_config(data)
    check_oracle_eligible(scenario, max_states=args.max_states)

    chain = build_embedded_chain(scenario)
    result = relative_value_iteration(chain)
    servers = scenario.max_concurrent_slices
    offered = float(sum(l / m for l, m in zip(scenario.arrival_rates,
                                              scenario.departure_rates)))
    blocking = erlang_b(servers, offered)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["num_states", "uniform_rate", "optimal_gain_per_hour", "rvi_iterations",
              "erlang_servers", "erlang_offered_load", "erlang_blocking",
              "erlang_acceptance"]
    row = [chain.num_states, chain.z, result.gain_per_hour, result.iterations,
           servers, offered, blocking, 1.0 - blocking]
    write_csv(out / "oracle.csv", header, [row], label="oracle")
    print(f"exact gain {result.gain_per_hour:.6f}/h over {chain.num_states} states; "
          f"blocking {blocking:.4f} at {servers} servers, {offered:.1f} offered")
    return 0


# -- argument parsing -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metaslice",
                                     description="Admission-control experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the learned admission policy")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--iterations", type=int, default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="run one policy and report metrics")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--policy", required=True)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--arrivals", type=int, default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="evaluate variants over a parameter sweep")
    p_sweep.add_argument("--sweep", required=True)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_oracle = sub.add_parser("oracle", help="exact solve of a small no-sharing scenario")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--out", required=True)
    p_oracle.add_argument("--max-states", type=int, default=5000)
    p_oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OracleEligibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
