"""Scenario configuration: system dimensions, traffic model, and toggles.

A scenario fully determines one simulated system: resource capacities,
the request classes with their Poisson arrival / exponential lifetime
rates, per-class revenue, the function-sharing cap, and the RNG seed.
Configs load from JSON so experiments are reproducible from files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import numpy as np

#: Per-function resource demand used by the default request generator,
#: one value per resource type (compute GFLOPS/s, storage GB, bandwidth MHz).
DEFAULT_FUNCTION_DEMAND = (40.0, 40.0, 40.0)


class ConfigError(ValueError):
    """Raised when a scenario config fails validation; names the bad field."""


@dataclass
class ScenarioConfig:
    """Parameters of one admission-control scenario.

    Defaults describe the standard benchmark system: three resource types
    of 1200 units each, nine function slots, three request classes with
    rates (60, 40, 25)/h, half-hour mean lifetimes and revenues (1, 2, 4).
    """

    num_resource_types: int = 3
    num_function_slots: int = 9
    config_bits: int = 1
    num_classes: int = 3
    capacity: tuple[float, ...] = (1200.0, 1200.0, 1200.0)
    arrival_rates: tuple[float, ...] = (60.0, 40.0, 25.0)
    departure_rates: tuple[float, ...] = (2.0, 2.0, 2.0)
    class_rewards: tuple[float, ...] = (1.0, 2.0, 4.0)
    resource_weights: tuple[float, ...] = (1 / 1200, 1 / 1200, 1 / 1200)
    share_cap: int = 8
    functions_per_slice: int = 3
    function_demand: tuple[float, ...] = DEFAULT_FUNCTION_DEMAND
    sharing_enabled: bool = True
    capacity_aware_similarity: bool = True
    # The footprint field of the observed state: the request's full demand
    # by default, or (when true) the post-sharing charge. Admission checks
    # and rewards always use the post-sharing charge either way.
    state_footprint_post_sharing: bool = False
    horizon_arrivals: int = 10_000
    seed: int = 0
    initial_occupancy: tuple[int, ...] | None = None

    def __post_init__(self):
        self.capacity = tuple(float(c) for c in self.capacity)
        self.arrival_rates = tuple(float(r) for r in self.arrival_rates)
        self.departure_rates = tuple(float(r) for r in self.departure_rates)
        self.class_rewards = tuple(float(r) for r in self.class_rewards)
        self.resource_weights = tuple(float(w) for w in self.resource_weights)
        self.function_demand = tuple(float(x) for x in self.function_demand)
        if self.initial_occupancy is not None:
            self.initial_occupancy = tuple(int(x) for x in self.initial_occupancy)
        self.validate()

    def validate(self):
        def check(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        check(self.num_resource_types >= 1, "num_resource_types", "must be >= 1")
        check(self.num_function_slots >= 1, "num_function_slots", "must be >= 1")
        check(self.config_bits >= 1, "config_bits", "must be >= 1")
        check(self.num_classes >= 1, "num_classes", "must be >= 1")
        check(len(self.capacity) == self.num_resource_types, "capacity",
              f"expected {self.num_resource_types} entries, got {len(self.capacity)}")
        check(all(c > 0 for c in self.capacity), "capacity", "entries must be > 0")
        for name in ("arrival_rates", "departure_rates", "class_rewards"):
            vals = getattr(self, name)
            check(len(vals) == self.num_classes, name,
                  f"expected {self.num_classes} entries, got {len(vals)}")
            check(all(v > 0 for v in vals), name, "entries must be > 0")
        check(len(self.resource_weights) == self.num_resource_types, "resource_weights",
              f"expected {self.num_resource_types} entries, got {len(self.resource_weights)}")
        check(all(w >= 0 for w in self.resource_weights), "resource_weights",
              "entries must be >= 0")
        check(self.share_cap >= 1, "share_cap", "must be >= 1")
        check(1 <= self.functions_per_slice <= self.num_function_slots,
              "functions_per_slice", "must be in 1..num_function_slots")
        check(len(self.function_demand) == self.num_resource_types, "function_demand",
              f"expected {self.num_resource_types} entries, got {len(self.function_demand)}")
        check(all(x >= 0 for x in self.function_demand), "function_demand",
              "entries must be >= 0")
        check(self.horizon_arrivals >= 0, "horizon_arrivals", "must be >= 0")
        if self.initial_occupancy is not None:
            check(len(self.initial_occupancy) == self.num_classes, "initial_occupancy",
                  f"expected {self.num_classes} entries, got {len(self.initial_occupancy)}")
            check(all(x >= 0 for x in self.initial_occupancy), "initial_occupancy",
                  "entries must be >= 0")

    @property
    def max_similarity(self) -> float:
        """Upper bound of the similarity index: requested slots / total slots."""
        return self.functions_per_slice / self.num_function_slots

    @property
    def encoding_width(self) -> int:
        """Width of the flat state encoding consumed by value networks."""
        return 2 * self.num_resource_types + self.num_classes + 1

    @property
    def slice_footprint(self) -> np.ndarray:
        """Full (no sharing) resource demand of one slice, per type."""
        return self.functions_per_slice * np.asarray(self.function_demand, dtype=float)

    @property
    def max_concurrent_slices(self) -> int:
        """Capacity in fully dedicated slices, the binding count across types."""
        fp = self.slice_footprint
        cap = np.asarray(self.capacity, dtype=float)
        with np.errstate(divide="ignore"):
            per_type = np.where(fp > 0, np.floor(cap / np.where(fp > 0, fp, 1.0)), np.inf)
        return int(per_type.min())

    def replace(self, **kwargs) -> "ScenarioConfig":
        data = asdict(self)
        data.update(kwargs)
        return ScenarioConfig(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown field")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("top level: expected a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text())
