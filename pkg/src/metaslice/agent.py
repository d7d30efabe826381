"""Admission-control agent: double Q-learning on the dueling network.

The training loop follows the classic recipe for a continuing task:
act epsilon-greedily, store each transition in a replay ring, sample a
uniform mini-batch, build targets by selecting the next action with the
online network and evaluating it with a periodically synchronized
target network, and take one SGD step. There are no terminal states, so
targets always bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .nets import DuelingNet
from .policies import ValueNetPolicy
from .simulation import AdmissionSimulator, SystemState


class StateEncoder:
    """Flatten a decision-epoch state into [0, 1]-scaled features.

    Layout: available/capacity per type, footprint/capacity per type,
    one-hot class, similarity/max-similarity.
    """

    def __init__(self, config: ScenarioConfig):
        self.capacity = np.asarray(config.capacity, dtype=np.float64)
        self.num_classes = config.num_classes
        self.max_similarity = config.max_similarity
        self.width = config.encoding_width

    def __call__(self, state: SystemState) -> np.ndarray:
        out = np.empty(self.width)
        d = self.capacity.size
        out[:d] = state.available / self.capacity
        out[d:2 * d] = state.footprint / self.capacity
        onehot = out[2 * d:2 * d + self.num_classes]
        onehot[:] = 0.0
        onehot[state.class_id - 1] = 1.0
        out[-1] = state.similarity / self.max_similarity
        return out


def select_action(net: DuelingNet, encoding: np.ndarray, epsilon: float, rng) -> int:
    """Epsilon-greedy action; greedy ties resolve to reject."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(0, 2))
    q = net.q_values(encoding)
    return int(q[1] > q[0])


def double_q_target(rewards, next_states, q_net: DuelingNet, target_net: DuelingNet,
                    gamma: float) -> np.ndarray:
    """Bootstrap targets: select actions online, evaluate with the target net."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    rewards = np.atleast_1d(np.asarray(rewards, dtype=np.float64))
    next_states = np.atleast_2d(np.asarray(next_states, dtype=np.float64))
    if not (np.isfinite(rewards).all() and np.isfinite(next_states).all()):
        raise ValueError("non-finite inputs to the target computation")
    _, _, q_online = q_net.forward(next_states)
    best = q_online.argmax(axis=1)
    _, _, q_eval = target_net.forward(next_states)
    return rewards + gamma * q_eval[np.arange(len(rewards)), best]


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int, state_width: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_width))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_width))
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, state, action: int, reward: float, next_state):
        i = self._pos
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng):
        if batch_size > self.size:
            raise ValueError("not enough stored transitions to sample")
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])


@dataclass
class EpsilonSchedule:
    """Linear decay from start to end over ``decay_steps``, then flat."""

    start: float = 1.0
    end: float = 0.01
    decay_steps: int = 100_000

    def value(self, step: int) -> float:
        if self.decay_steps <= 0:
            return self.end
        frac = min(max(step, 0) / self.decay_steps, 1.0)
        return self.start + (self.end - self.start) * frac


@dataclass
class TrainConfig:
    steps: int
    lr: float = 1e-3
    gamma: float = 0.9
    batch_size: int = 32
    buffer_capacity: int = 100_000
    target_sync_every: int = 10_000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_decay_steps: int = 100_000
    hidden: tuple[int, ...] = (64, 64)
    aggregation: str = "mean"
    eval_every: int = 5_000
    eval_arrivals: int = 2_000
    seed: int = 0

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.epsilon_start, self.epsilon_end,
                               self.epsilon_decay_steps)


@dataclass
class CurvePoint:
    step: int
    eval_average_reward: float
    epsilon: float


@dataclass
class TrainResult:
    net: DuelingNet
    encoder: StateEncoder
    curve: list[CurvePoint] = field(default_factory=list)

    def policy(self) -> ValueNetPolicy:
        return ValueNetPolicy(self.net, self.encoder)


def evaluate_policy(policy, scenario: ScenarioConfig, seed: int,
                    arrivals: int):
    """Average reward of a frozen policy on a fresh simulator."""
    sim = AdmissionSimulator(scenario, seed=seed)
    return sim.run_episode(policy, arrivals).report()


def train(env: AdmissionSimulator, cfg: TrainConfig, _probe=None) -> TrainResult:
    """Run the learning loop on ``env`` and return the trained network.

    Deterministic given the train seed and the environment's seed. The
    learning curve holds greedy-policy evaluations on a fixed-seed copy
    of the scenario, taken every ``eval_every`` steps and once at the end.
    ``_probe(step, net, target)`` is a test hook called after each step.
    """
    rng = np.random.default_rng(cfg.seed)
    encoder = StateEncoder(env.config)
    net = DuelingNet(encoder.width, cfg.hidden, aggregation=cfg.aggregation,
                     seed=cfg.seed)
    target = net.copy()
    buffer = ReplayBuffer(cfg.buffer_capacity, encoder.width)
    schedule = cfg.schedule()
    eval_seed = cfg.seed + 7919  # fixed across snapshots to keep curves comparable
    curve: list[CurvePoint] = []

    def snapshot(step: int, eps: float):
        if cfg.eval_arrivals <= 0:
            return
        report = evaluate_policy(ValueNetPolicy(net.copy(), encoder), env.config,
                                 eval_seed, cfg.eval_arrivals)
        curve.append(CurvePoint(step, report.average_reward, eps))

    state_enc = encoder(env.current_state)
    for step in range(1, cfg.steps + 1):
        eps = schedule.value(step - 1)
        action = select_action(net, state_enc, eps, rng)
        tr = env.step(action)
        next_enc = encoder(tr.next_state)
        buffer.add(state_enc, tr.action, tr.reward, next_enc)
        state_enc = next_enc

        if len(buffer) >= cfg.batch_size:
            states, actions, rewards, next_states = buffer.sample(cfg.batch_size, rng)
            targets = double_q_target(rewards, next_states, net, target, cfg.gamma)
            net.backward_and_update(states, actions, targets, cfg.lr)
        if cfg.target_sync_every > 0 and step % cfg.target_sync_every == 0:
            target = net.copy()
        if cfg.eval_every > 0 and step % cfg.eval_every == 0:
            snapshot(step, eps)
        if _probe is not None:
            _probe(step, net, target)

    if cfg.steps > 0 and (cfg.eval_every <= 0 or cfg.steps % cfg.eval_every != 0):
        snapshot(cfg.steps, schedule.value(cfg.steps - 1))
    return TrainResult(net, encoder, curve)
