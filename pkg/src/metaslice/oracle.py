"""Exact small-instance solvers used as ground truth for the simulator.

With sharing disabled and homogeneous per-slice demand, the system
collapses to a multi-class loss system whose occupancy vector is a
finite Markov chain. This module uniformizes that chain (a single rate
covering every state, with zero-probability self-loop "trivial" events
filling the gap), enumerates the embedded decision chain over
(occupancy, pending event) pairs, and solves it exactly:

* relative value iteration for the optimal long-run reward per hour,
* stationary analysis of any fixed policy, including per-start-state
  long-run averages (which must agree for an irreducible chain),
* brute-force enumeration of all deterministic stationary policies,
* the classic blocking-probability recursion for the single-rate case.

Solvers are restricted to instances whose state count stays small; the
full-size scenarios are validated through distributional anchors
instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

ARRIVAL, DEPARTURE, TRIVIAL = "arrival", "departure", "trivial"


class ReducibleChainError(RuntimeError):
    """The chain has unreachable states, contradicting the model's structure."""


class OracleEligibilityError(ValueError):
    """The scenario cannot be solved exactly (sharing on, or too large)."""


def enumerate_occupancies(num_classes: int, max_total: int) -> list[tuple[int, ...]]:
    """All per-class slice-count vectors with total at most ``max_total``."""
    occupancies = []
    for total in range(max_total + 1):
        for combo in itertools.combinations_with_replacement(range(num_classes), total):
            x = [0] * num_classes
            for c in combo:
                x[c] += 1
            occupancies.append(tuple(x))
    return sorted(set(occupancies))


def uniformization_rates(arrival_rates, departure_rates, occupancies):
    """Uniform event rate z and the per-occupancy total rates.

    z is the largest total event rate over the feasible occupancies, so
    every occupancy's true rate z_x is at most z and the shortfall
    becomes the trivial-event probability.
    """
    lam = np.asarray(arrival_rates, dtype=float)
    mu = np.asarray(departure_rates, dtype=float)
    if not occupancies:
        raise ValueError("occupancy set must be non-empty")
    rates = {x: float(lam.sum() + mu @ np.asarray(x)) for x in occupancies}
    return max(rates.values()), rates


def event_probabilities(x, arrival_rates, departure_rates, z: float) -> dict:
    """Distribution of the next uniformized event from occupancy ``x``."""
    lam = np.asarray(arrival_rates, dtype=float)
    mu = np.asarray(departure_rates, dtype=float)
    x = np.asarray(x)
    probs = {}
    for i in range(lam.size):
        probs[(ARRIVAL, i + 1)] = lam[i] / z
        if x[i] > 0:
            probs[(DEPARTURE, i + 1)] = x[i] * mu[i] / z
    trivial = 1.0 - (lam.sum() + mu @ x) / z
    if trivial < -1e-12:
        raise ValueError("z is smaller than an occupancy's event rate")
    if trivial > 1e-12:
        probs[(TRIVIAL,)] = trivial
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise AssertionError(f"event probabilities sum to {total}")
    return probs


@dataclass
class EmbeddedChain:
    """Decision chain over (occupancy, pending event) states.

    ``reject_matrix``/``accept_matrix`` give transition rows under each
    action (identical except at arrival states where accepting is
    feasible); rewards likewise. Sojourns are 1/z everywhere, so hourly
    averages are per-step averages times z.
    """

    states: list[tuple[tuple[int, ...], tuple]]
    index: dict
    z: float
    max_slices: int
    reject_matrix: np.ndarray
    accept_matrix: np.ndarray
    reject_rewards: np.ndarray
    accept_rewards: np.ndarray
    arrival_class: np.ndarray  # class id at arrival states, 0 elsewhere
    occupancy_total: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.states)

    def sojourns(self) -> np.ndarray:
        return np.full(self.num_states, 1.0 / self.z)

    def accept_feasible(self) -> np.ndarray:
        return (self.arrival_class > 0) & (self.occupancy_total < self.max_slices)

    def policy_matrices(self, policy: np.ndarray):
        """Transition matrix and reward vector under a 0/1 policy vector."""
        policy = np.asarray(policy).astype(bool)
        p = np.where(policy[:, None], self.accept_matrix, self.reject_matrix)
        r = np.where(policy, self.accept_rewards, self.reject_rewards)
        return p, r


def accept_rewards_per_class(config: ScenarioConfig) -> np.ndarray:
    """Immediate reward of accepting one fully dedicated slice per class."""
    penalty = float(np.asarray(config.resource_weights) @ config.slice_footprint)
    return np.asarray(config.class_rewards, dtype=float) - penalty


def estimate_num_states(config: ScenarioConfig) -> int:
    occ = len(enumerate_occupancies(config.num_classes, config.max_concurrent_slices))
    return occ * (2 * config.num_classes + 1)


def check_oracle_eligible(config: ScenarioConfig, max_states: int = 5000):
    if config.sharing_enabled:
        raise OracleEligibilityError(
            "exact solving requires sharing_enabled=false; sharing scenarios are "
            "validated by simulation invariants instead")
    n = estimate_num_states(config)
    if n > max_states:
        raise OracleEligibilityError(
            f"state space too large for exact solving: about {n} states "
            f"(limit {max_states})")


def build_embedded_chain(config: ScenarioConfig) -> EmbeddedChain:
    """Enumerate the uniformized decision chain of a no-sharing scenario."""
    check_oracle_eligible(config)
    lam, mu = config.arrival_rates, config.departure_rates
    max_slices = config.max_concurrent_slices
    occupancies = enumerate_occupancies(config.num_classes, max_slices)
    z, rates = uniformization_rates(lam, mu, occupancies)
    rewards = accept_rewards_per_class(config)

    states = []
    for x in occupancies:
        for event in event_probabilities(x, lam, mu, z):
            states.append((x, event))
    index = {s: k for k, s in enumerate(states)}
    n = len(states)

    reject_m = np.zeros((n, n))
    accept_m = np.zeros((n, n))
    reject_r = np.zeros(n)
    accept_r = np.zeros(n)
    arrival_class = np.zeros(n, dtype=np.int64)
    occ_total = np.zeros(n, dtype=np.int64)

    def outcome(x, event, accept: bool):
        kind = event[0]
        if kind == TRIVIAL:
            return x, 0.0
        i = event[1]
        if kind == DEPARTURE:
            y = list(x)
            y[i - 1] -= 1
            return tuple(y), 0.0
        if accept and sum(x) < max_slices:
            y = list(x)
            y[i - 1] += 1
            return tuple(y), float(rewards[i - 1])
        return x, 0.0

    for k, (x, event) in enumerate(states):
        occ_total[k] = sum(x)
        if event[0] == ARRIVAL:
            arrival_class[k] = event[1]
        for accept, (matrix, vec) in ((False, (reject_m, reject_r)),
                                      (True, (accept_m, accept_r))):
            x_next, reward = outcome(x, event, accept)
            vec[k] = reward
            for nxt_event, prob in event_probabilities(x_next, lam, mu, z).items():
                matrix[k, index[(x_next, nxt_event)]] += prob

    for m in (reject_m, accept_m):
        if np.abs(m.sum(axis=1) - 1.0).max() > 1e-12:
            raise AssertionError("transition rows must sum to 1")
    return EmbeddedChain(states, index, z, max_slices, reject_m, accept_m,
                         reject_r, accept_r, arrival_class, occ_total)


# -- exact solving ----------------------------------------------------------


@dataclass
class RviResult:
    gain_per_hour: float
    gain_per_step: float
    policy: np.ndarray
    iterations: int


def relative_value_iteration(chain: EmbeddedChain, tol: float = 1e-9,
                             max_iter: int = 500_000) -> RviResult:
    """Optimal long-run average reward by relative value iteration.

    Runs on the half-lazy chain (self-loop weight one half), which keeps
    every policy's gain unchanged while guaranteeing aperiodicity, and
    stops when the span of successive value differences drops below
    ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    n = chain.num_states
    p0 = 0.5 * np.eye(n) + 0.5 * chain.reject_matrix
    p1 = 0.5 * np.eye(n) + 0.5 * chain.accept_matrix
    # Halving the step also halves per-step rewards measured per transition;
    # keeping rewards as-is and halving transitions would distort the gain,
    # so rewards are halved to match the lazy chain's slowed clock.
    r0 = 0.5 * chain.reject_rewards
    r1 = 0.5 * chain.accept_rewards

    h = np.zeros(n)
    for it in range(1, max_iter + 1):
        q0 = r0 + p0 @ h
        q1 = r1 + p1 @ h
        h_new = np.maximum(q0, q1)
        delta = h_new - h
        span = float(delta.max() - delta.min())
        h = h_new - h_new[0]
        if span < tol:
            gain_lazy = float(0.5 * (delta.max() + delta.min()))
            policy = (q1 > q0).astype(np.int64)
            gain_step = 2.0 * gain_lazy  # undo the lazy slowdown
            return RviResult(gain_step * chain.z, gain_step, policy, it)
    raise RuntimeError(f"relative value iteration did not converge in {max_iter} iterations")


def stationary_distribution(matrix: np.ndarray) -> np.ndarray:
    """Stationary row vector of a unichain stochastic matrix.

    Some policies leave high-occupancy states transient, which is fine;
    two or more closed communicating classes would contradict the
    model's structure and raise ReducibleChainError.
    """
    n = matrix.shape[0]
    _check_unichain(matrix)
    a = (matrix.T - np.eye(n)).copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    if (pi < -1e-8).any():
        raise RuntimeError("stationary solve produced negative probabilities")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _strongly_connected_components(adj_lists: list[list[int]]) -> np.ndarray:
    """Component label per node (iterative Kosaraju)."""
    n = len(adj_lists)
    order: list[int] = []
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        stack = [(start, 0)]
        seen[start] = True
        while stack:
            node, ptr = stack.pop()
            if ptr < len(adj_lists[node]):
                stack.append((node, ptr + 1))
                nxt = adj_lists[node][ptr]
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append((nxt, 0))
            else:
                order.append(node)
    reverse: list[list[int]] = [[] for _ in range(n)]
    for node, outs in enumerate(adj_lists):
        for nxt in outs:
            reverse[nxt].append(node)
    labels = np.full(n, -1, dtype=np.int64)
    comp = 0
    for node in reversed(order):
        if labels[node] >= 0:
            continue
        stack = [node]
        labels[node] = comp
        while stack:
            cur = stack.pop()
            for nxt in reverse[cur]:
                if labels[nxt] < 0:
                    labels[nxt] = comp
                    stack.append(nxt)
        comp += 1
    return labels


def _check_unichain(matrix: np.ndarray):
    adj = matrix > 0
    adj_lists = [np.flatnonzero(row).tolist() for row in adj]
    labels = _strongly_connected_components(adj_lists)
    closed = set(labels.tolist())
    for node, outs in enumerate(adj_lists):
        for nxt in outs:
            if labels[nxt] != labels[node]:
                closed.discard(int(labels[node]))
    if len(closed) != 1:
        raise ReducibleChainError(
            f"{len(closed)} closed communicating classes; expected exactly one")


def chain_average_reward(chain: EmbeddedChain, policy: np.ndarray) -> float:
    """Long-run reward per hour of a fixed policy, by stationary analysis.

    The ratio form: expected reward per step over expected sojourn per
    step, both weighted by the stationary distribution.
    """
    p, r = chain.policy_matrices(policy)
    pi = stationary_distribution(p)
    return float(pi @ r) / float(pi @ chain.sojourns())


def start_state_gains(chain: EmbeddedChain, policy: np.ndarray,
                      tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Per-start-state long-run average reward per hour.

    Computed as the limiting (Cesaro) row averages of the policy chain,
    taken on its half-lazy version where plain powers converge
    geometrically to the limiting matrix.
    """
    p, r = chain.policy_matrices(policy)
    n = chain.num_states
    lazy = 0.5 * np.eye(n) + 0.5 * p
    rows = np.eye(n)
    for _ in range(max_iter):
        nxt = rows @ lazy
        if np.abs(nxt - rows).max() < tol:
            rows = nxt
            break
        rows = nxt
    else:
        raise RuntimeError("limiting-matrix iteration did not converge")
    return (rows @ r) / (rows @ chain.sojourns())


def enumerate_policies_best(chain: EmbeddedChain, limit: int = 4096):
    """Exhaustive search over deterministic stationary policies.

    Only arrival states where accepting is feasible carry a real choice;
    everything else is forced to the reject (no-op) action.
    """
    decision_states = np.flatnonzero(chain.accept_feasible())
    if 2 ** decision_states.size > limit:
        raise ValueError(f"too many policies to enumerate: 2^{decision_states.size}")
    best_gain, best_policy = -np.inf, None
    for bits in itertools.product((0, 1), repeat=decision_states.size):
        policy = np.zeros(chain.num_states, dtype=np.int64)
        policy[decision_states] = bits
        gain = chain_average_reward(chain, policy)
        if gain > best_gain:
            best_gain, best_policy = gain, policy
    return best_gain, best_policy


# -- sampling-based uniformized chain ----------------------------------------


def simulate_uniformized(config: ScenarioConfig, accept_fn, num_steps: int, rng) -> dict:
    """Walk the discrete uniformized chain and report empirical metrics.

    ``accept_fn(occupancy, class_id)`` decides arrivals; infeasible
    accepts are coerced to rejects exactly like the continuous-time
    simulator. Elapsed time is steps/z.
    """
    lam, mu = config.arrival_rates, config.departure_rates
    max_slices = config.max_concurrent_slices
    occupancies = enumerate_occupancies(config.num_classes, max_slices)
    z, _ = uniformization_rates(lam, mu, occupancies)
    rewards = accept_rewards_per_class(config)

    x = np.zeros(config.num_classes, dtype=np.int64)
    if config.initial_occupancy is not None:
        x[:] = config.initial_occupancy
    arrivals = np.zeros(config.num_classes, dtype=np.int64)
    accepts = np.zeros(config.num_classes, dtype=np.int64)
    total_reward = 0.0

    lam_arr = np.asarray(lam, dtype=float)
    mu_arr = np.asarray(mu, dtype=float)
    for _ in range(num_steps):
        cumulative = np.cumsum(np.concatenate([lam_arr, x * mu_arr])) / z
        idx = int(np.searchsorted(cumulative, rng.random(), side="right"))
        if idx >= cumulative.size:
            continue  # trivial event: nothing changes
        if idx < config.num_classes:
            class_id = idx + 1
            arrivals[idx] += 1
            if accept_fn(x.copy(), class_id) and x.sum() < max_slices:
                x[idx] += 1
                accepts[idx] += 1
                total_reward += rewards[idx]
        else:
            x[idx - config.num_classes] -= 1

    elapsed = num_steps / z
    total_arrivals = int(arrivals.sum())
    return {
        "arrivals": total_arrivals,
        "accepts": int(accepts.sum()),
        "acceptance_prob": accepts.sum() / total_arrivals if total_arrivals else 0.0,
        "acceptance_per_class": np.divide(accepts, arrivals,
                                          out=np.zeros(config.num_classes),
                                          where=arrivals > 0),
        "average_reward": total_reward / elapsed,
        "elapsed_hours": elapsed,
    }


# -- closed forms -------------------------------------------------------------


def erlang_b(servers: int, offered_load: float) -> float:
    """Blocking probability of the classic c-server loss system."""
    if servers < 0 or int(servers) != servers:
        raise ValueError("servers must be a non-negative integer")
    if offered_load <= 0:
        raise ValueError("offered_load must be > 0")
    b = 1.0
    for k in range(1, int(servers) + 1):
        b = offered_load * b / (k + offered_load * b)
    return b
