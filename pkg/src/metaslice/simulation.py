"""Continuous-time admission simulator.

Requests of each class arrive as independent Poisson streams (generated
via superposition: exponential gaps at the total rate, class drawn in
proportion to its rate) and accepted slices live for an exponential
time. The controller is queried exactly once per arrival; departures in
between are environment dynamics. An accept without enough available
resources is coerced to a reject with zero reward, so the environment,
not the policy, enforces the capacity constraint.

The state presented to policies holds the available resources, the
request's resource demand, its class, and its similarity index against
the best-matching instance. Admission itself always charges the
post-sharing footprint, so a request whose shared slots cover its whole
demand can be admitted even when the raw demand would not fit.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .metrics import MetricsAccumulator, MetricsReport, immediate_reward
from .resources import MetaSliceSpec, ResourceManager, admission_footprint
from .similarity import FunctionSet, SimilarityReport


@dataclass(frozen=True)
class SystemState:
    """Decision-epoch observation: (available, footprint, class, similarity).

    ``footprint`` is the request's full resource demand by default; the
    similarity index tells the controller how much of it sharing would
    cover. Scenarios can instead expose the post-sharing charge directly
    (``state_footprint_post_sharing``).
    """

    available: np.ndarray
    footprint: np.ndarray
    class_id: int
    similarity: float


@dataclass(frozen=True)
class Transition:
    """One decision epoch. ``action`` is the executed action: an accept
    whose actual (post-sharing) charge does not fit is recorded as the
    reject it was coerced into."""

    state: SystemState
    action: int
    reward: float
    next_state: SystemState
    tau: float  # hours between this decision epoch and the next


@dataclass
class EpisodeResult:
    accumulator: MetricsAccumulator
    transitions: list[Transition] | None = None

    def report(self) -> MetricsReport:
        return self.accumulator.finalize()


def sample_interarrival(class_id: int, config: ScenarioConfig, rng, size=None):
    """Exponential gap(s) between class-``class_id`` arrivals, in hours."""
    rate = config.arrival_rates[class_id - 1]
    return rng.exponential(1.0 / rate, size=size)


def sample_lifetime(class_id: int, config: ScenarioConfig, rng, size=None):
    """Exponential session length(s) for an accepted class-``class_id`` slice."""
    rate = config.departure_rates[class_id - 1]
    return rng.exponential(1.0 / rate, size=size)


@dataclass
class _PendingRequest:
    arrival_time: float
    spec: MetaSliceSpec
    report: SimilarityReport
    footprint: np.ndarray
    state: SystemState


class AdmissionSimulator:
    """One scenario instance: deterministic under its seed, single-threaded."""

    def __init__(self, config: ScenarioConfig, seed: int | None = None):
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.reset()

    def reset(self, initial_occupancy=None) -> SystemState:
        cfg = self.config
        self.rng = np.random.default_rng(self.seed)
        self.manager = ResourceManager(cfg.capacity, cfg.share_cap,
                                       cfg.capacity_aware_similarity)
        self.clock = 0.0
        self.arrivals_seen = 0
        self._next_slice_id = 0
        self._departures: list[tuple[float, int]] = []
        self.accumulator = MetricsAccumulator(cfg.num_classes)
        self._total_rate = float(sum(cfg.arrival_rates))
        self._class_cdf = np.cumsum(cfg.arrival_rates) / self._total_rate
        self._demand = np.asarray(cfg.function_demand, dtype=float)

        occupancy = initial_occupancy if initial_occupancy is not None else cfg.initial_occupancy
        if occupancy is not None:
            self._seed_occupancy(occupancy)
        self._pending = self._draw_request(self._next_arrival_time())
        return self._pending.state

    # -- internals ---------------------------------------------------------

    def _seed_occupancy(self, occupancy):
        """Start with the given per-class slice counts already running."""
        for class_id, count in enumerate(occupancy, start=1):
            for _ in range(int(count)):
                spec = self._draw_spec(class_id)
                report = self._match(spec)
                footprint = admission_footprint(spec, report, self.config.sharing_enabled)
                if not self.manager.has_room(footprint):
                    raise ValueError("initial_occupancy exceeds capacity")
                self._admit(spec, report, footprint)

    def _next_arrival_time(self) -> float:
        return self.clock + self.rng.exponential(1.0 / self._total_rate)

    def _draw_class(self) -> int:
        return int(np.searchsorted(self._class_cdf, self.rng.random(), side="right")) + 1

    def _draw_spec(self, class_id: int | None = None) -> MetaSliceSpec:
        cfg = self.config
        if class_id is None:
            class_id = self._draw_class()
        slots = self.rng.choice(cfg.num_function_slots, size=cfg.functions_per_slice,
                                replace=False)
        if cfg.config_bits == 1:
            configs = np.ones((cfg.functions_per_slice, 1), dtype=np.uint8)
        else:
            # Any non-trivial bit pattern is a valid per-slot configuration.
            configs = np.zeros((cfg.functions_per_slice, cfg.config_bits), dtype=np.uint8)
            for row in configs:
                while not row.any():
                    row[:] = self.rng.integers(0, 2, size=cfg.config_bits)
        functions = FunctionSet.from_slot_indices(slots, cfg.num_function_slots,
                                                  cfg.config_bits, configs)
        resources = np.zeros((cfg.num_function_slots, cfg.num_resource_types))
        resources[slots] = self._demand
        return MetaSliceSpec(class_id, functions, resources)

    def _match(self, spec: MetaSliceSpec) -> SimilarityReport:
        if not self.config.sharing_enabled:
            return SimilarityReport.no_match()
        return self.manager.match_request(spec.functions)

    def _process_departures(self, until: float):
        while self._departures and self._departures[0][0] <= until:
            when, slice_id = heapq.heappop(self._departures)
            self.accumulator.advance(when, self.manager.num_running_slices,
                                     self.manager.num_instances)
            self.clock = when
            self.manager.release(slice_id)

    def _draw_request(self, arrival_time: float) -> _PendingRequest:
        self._process_departures(arrival_time)
        self.accumulator.advance(arrival_time, self.manager.num_running_slices,
                                 self.manager.num_instances)
        self.clock = arrival_time
        spec = self._draw_spec()
        report = self._match(spec)
        footprint = admission_footprint(spec, report, self.config.sharing_enabled)
        shown = footprint if self.config.state_footprint_post_sharing else spec.total_demand()
        state = SystemState(self.manager.available.copy(), shown.copy(),
                            spec.class_id, report.similarity)
        return _PendingRequest(arrival_time, spec, report, footprint, state)

    def _admit(self, spec, report, footprint) -> int:
        slice_id = self._next_slice_id
        self._next_slice_id += 1
        self.manager.place(slice_id, spec, report, footprint)
        lifetime = sample_lifetime(spec.class_id, self.config, self.rng)
        heapq.heappush(self._departures, (self.clock + lifetime, slice_id))
        return slice_id

    # -- decision loop -------------------------------------------------------

    @property
    def current_state(self) -> SystemState:
        return self._pending.state

    def step(self, action: int) -> Transition:
        """Resolve the pending request and advance to the next arrival."""
        if action not in (0, 1):
            raise ValueError("action must be 0 or 1")
        pending = self._pending
        cfg = self.config

        executed = action
        if action == 1 and not self.manager.has_room(pending.footprint):
            executed = 0  # coerced: capacity is enforced by the environment
        accepted = executed == 1
        if accepted:
            self._admit(pending.spec, pending.report, pending.footprint)
        reward = immediate_reward(pending.spec.class_id, pending.footprint, accepted,
                                  cfg.resource_weights, cfg.class_rewards)

        self.arrivals_seen += 1
        nxt = self._draw_request(self._next_arrival_time())
        tau = nxt.arrival_time - pending.arrival_time
        self.accumulator.record_decision(pending.spec.class_id, accepted, reward, tau)
        self._pending = nxt
        return Transition(pending.state, executed, reward, nxt.state, tau)

    def iter_episode(self, policy, max_arrivals: int):
        """Yield one transition per arrival, in time order."""
        for _ in range(max_arrivals):
            yield self.step(policy.decide(self.current_state))

    def run_episode(self, policy, max_arrivals: int,
                    collect_transitions: bool = False) -> EpisodeResult:
        transitions = [] if collect_transitions else None
        for tr in self.iter_episode(policy, max_arrivals):
            if transitions is not None:
                transitions.append(tr)
        return EpisodeResult(self.accumulator, transitions)
