"""Immediate reward and episode metrics.

The headline metric is reward per simulated hour (total reward divided
by the summed inter-arrival gaps), alongside acceptance probabilities
overall and per class and time-weighted averages of the running slice
and instance counts. Accumulators merge, so parallel runs combine
exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def immediate_reward(class_id: int, occupied: np.ndarray, accepted: bool,
                     weights, class_rewards) -> float:
    """Revenue of one admission decision.

    An accepted class-i request earns its class revenue minus the
    weighted resources it occupies; a rejection earns nothing.
    """
    if not 1 <= class_id <= len(class_rewards):
        raise ValueError(f"class_id {class_id} outside 1..{len(class_rewards)}")
    if not accepted:
        return 0.0
    penalty = float(np.asarray(weights, dtype=float) @ np.asarray(occupied, dtype=float))
    return float(class_rewards[class_id - 1]) - penalty


@dataclass
class MetricsAccumulator:
    """Running totals for one episode (or a merge of several)."""

    num_classes: int
    total_reward: float = 0.0
    total_time: float = 0.0
    arrivals: np.ndarray = None
    accepts: np.ndarray = None
    slice_time_integral: float = 0.0
    instance_time_integral: float = 0.0
    integrated_time: float = 0.0
    _last_event_time: float = 0.0

    def __post_init__(self):
        if self.arrivals is None:
            self.arrivals = np.zeros(self.num_classes, dtype=np.int64)
        if self.accepts is None:
            self.accepts = np.zeros(self.num_classes, dtype=np.int64)

    def record_decision(self, class_id: int, accepted: bool, reward: float, tau: float):
        """One decision epoch: arrival of ``class_id``, its outcome, and the
        gap ``tau`` to the next epoch."""
        if tau < 0:
            raise ValueError("tau must be >= 0")
        self.arrivals[class_id - 1] += 1
        if accepted:
            self.accepts[class_id - 1] += 1
        self.total_reward += reward
        self.total_time += tau

    def advance(self, now: float, running_slices: int, running_instances: int):
        """Integrate occupancy counts up to ``now``; call before each change."""
        dt = now - self._last_event_time
        if dt < -1e-12:
            raise ValueError("time went backwards")
        if dt > 0:
            self.slice_time_integral += running_slices * dt
            self.instance_time_integral += running_instances * dt
            self.integrated_time += dt
            self._last_event_time = now

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge accumulators with different class counts")
        out = MetricsAccumulator(self.num_classes)
        out.total_reward = self.total_reward + other.total_reward
        out.total_time = self.total_time + other.total_time
        out.arrivals = self.arrivals + other.arrivals
        out.accepts = self.accepts + other.accepts
        out.slice_time_integral = self.slice_time_integral + other.slice_time_integral
        out.instance_time_integral = self.instance_time_integral + other.instance_time_integral
        out.integrated_time = self.integrated_time + other.integrated_time
        return out

    def finalize(self) -> "MetricsReport":
        if self.total_time <= 0:
            raise ZeroDivisionError("cannot average over zero simulated time")
        arr_total = int(self.arrivals.sum())
        acc_total = int(self.accepts.sum())
        per_class = np.divide(self.accepts, self.arrivals,
                              out=np.zeros(self.num_classes), where=self.arrivals > 0)
        occ_time = self.integrated_time if self.integrated_time > 0 else self.total_time
        return MetricsReport(
            num_classes=self.num_classes,
            average_reward=self.total_reward / self.total_time,
            acceptance_prob=acc_total / arr_total if arr_total else 0.0,
            acceptance_per_class=tuple(float(p) for p in per_class),
            avg_running_slices=self.slice_time_integral / occ_time,
            avg_instances=self.instance_time_integral / occ_time,
            arrivals=arr_total,
            accepts=acc_total,
            total_reward=self.total_reward,
            total_time=self.total_time,
        )


@dataclass
class MetricsReport:
    num_classes: int
    average_reward: float
    acceptance_prob: float
    acceptance_per_class: tuple[float, ...]
    avg_running_slices: float
    avg_instances: float
    arrivals: int
    accepts: int
    total_reward: float
    total_time: float

    METRIC_COLUMNS = ("average_reward", "acceptance_prob", "avg_running_slices",
                      "avg_instances", "arrivals", "accepts", "total_reward",
                      "total_time")

    def columns(self) -> list[str]:
        cols = list(self.METRIC_COLUMNS)
        cols[2:2] = [f"acceptance_class_{i + 1}" for i in range(self.num_classes)]
        return cols

    def values(self) -> list:
        vals = [self.average_reward, self.acceptance_prob,
                *self.acceptance_per_class, self.avg_running_slices,
                self.avg_instances, self.arrivals, self.accepts,
                self.total_reward, self.total_time]
        for v in vals:
            if not np.isfinite(v):
                raise ValueError("non-finite metric value")
        return vals


CSV_SCHEMA_VERSION = "metaslice-csv/v1"


def write_csv(path, header: list[str], rows: list[list], label: str):
    """Write rows with a schema-version comment line on top."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {CSV_SCHEMA_VERSION} kind={label}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV written by write_csv, skipping comment lines."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(io.StringIO("".join(lines)))
    rows = list(reader)
    if not rows:
        return [], []
    return rows[0], rows[1:]
