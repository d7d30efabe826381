"""Render experiment figures from the simulator's CSV outputs.

Five figure kinds cover the standard experiment battery:

* ``curve``          - evaluation reward vs training step (convergence)
* ``capacity-sweep`` - metric vs system capacity, one line per variant
* ``nl-sweep``       - metric vs share cap
* ``r3-sweep``       - metric vs class-3 revenue
* ``per-class``      - per-class acceptance panels, one panel per variant

Sweep lines aggregate seeds as mean with a +/- one standard deviation
band. Rendering is read-only and deterministic: fixed style, fixed
ordering, metadata stripped from the PNG, so identical CSVs produce
identical bytes.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("curve", "capacity-sweep", "nl-sweep", "r3-sweep", "per-class")

SWEEP_X_LABEL = {
    "capacity-sweep": "supported functions",
    "nl-sweep": "share cap per function",
    "r3-sweep": "class-3 revenue",
}

_STYLE = {"figure.figsize": (6.0, 4.0), "figure.dpi": 120, "axes.grid": True,
          "grid.alpha": 0.3, "font.size": 9, "svg.hashsalt": "plotkit"}
_PNG_METADATA = {"Software": None}


class FigureError(ValueError):
    """Bad figure request: empty input or missing columns."""


@dataclass
class FigureSpec:
    csv_path: Path
    kind: str
    out_path: Path
    metric: str = "average_reward"
    group_columns: tuple[str, ...] = ("variant",)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {FIGURE_KINDS}")
        self.csv_path = Path(self.csv_path)
        self.out_path = Path(self.out_path)


@dataclass
class Table:
    header: list[str]
    rows: list[list[str]]
    columns: dict[str, list[str]] = field(init=False)

    def __post_init__(self):
        self.columns = {name: [row[i] for row in self.rows]
                        for i, name in enumerate(self.header)}

    def require(self, *names: str):
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise FigureError(f"missing column(s) {missing} in CSV "
                              f"(have {self.header})")

    def floats(self, name: str) -> np.ndarray:
        return np.array([float(v) for v in self.columns[name]])


def load_table(path: Path) -> Table:
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if len(rows) < 2:
        raise FigureError(f"{path}: no data rows")
    return Table(rows[0], rows[1:])


def _variants(table: Table, column: str = "variant") -> list[str]:
    if column not in table.columns:
        return [""]
    return sorted(set(table.columns[column]))


def _mean_std_by(xs, ys):
    """Aggregate y values sharing an x: (sorted xs, means, stds)."""
    groups = defaultdict(list)
    for x, y in zip(xs, ys):
        groups[x].append(y)
    keys = sorted(groups)
    means = np.array([np.mean(groups[k]) for k in keys])
    stds = np.array([np.std(groups[k]) for k in keys])
    return np.array(keys), means, stds


def render_curve(spec: FigureSpec, table: Table, ax):
    table.require("step", "eval_average_reward")
    steps = table.floats("step")
    rewards = table.floats("eval_average_reward")
    group = spec.group_columns[0] if spec.group_columns else "variant"
    for variant in _variants(table, group):
        if variant:
            mask = np.array([v == variant for v in table.columns[group]])
        else:
            mask = np.ones(len(steps), dtype=bool)
        xs, means, stds = _mean_std_by(steps[mask], rewards[mask])
        ax.plot(xs, means, marker="o", markersize=3, label=variant or "policy")
        if stds.any():
            ax.fill_between(xs, means - stds, means + stds, alpha=0.2)
    ax.set_xlabel("training step")
    ax.set_ylabel("evaluation average reward (per hour)")
    ax.legend(loc="lower right")


def render_sweep(spec: FigureSpec, table: Table, ax):
    group = spec.group_columns[0] if spec.group_columns else "variant"
    table.require("value", group, spec.metric)
    values = table.floats("value")
    metric = table.floats(spec.metric)
    for variant in _variants(table, group):
        mask = np.array([v == variant for v in table.columns[group]])
        xs, means, stds = _mean_std_by(values[mask], metric[mask])
        ax.plot(xs, means, marker="o", markersize=3, label=variant)
        if stds.any():
            ax.fill_between(xs, means - stds, means + stds, alpha=0.2)
    ax.set_xlabel(SWEEP_X_LABEL[spec.kind])
    ax.set_ylabel(spec.metric.replace("_", " "))
    ax.legend()


def render_per_class(spec: FigureSpec, table: Table, fig):
    class_cols = sorted(c for c in table.header if c.startswith("acceptance_class_"))
    if not class_cols:
        raise FigureError("missing column(s) ['acceptance_class_*'] in CSV")
    table.require("value", "variant")
    variants = _variants(table)
    values = table.floats("value")
    axes = fig.subplots(1, len(variants), squeeze=False, sharey=True)[0]
    for ax, variant in zip(axes, variants):
        mask = np.array([v == variant for v in table.columns["variant"]])
        for col in class_cols:
            xs, means, stds = _mean_std_by(values[mask], table.floats(col)[mask])
            label = "class " + col.rsplit("_", 1)[1]
            ax.plot(xs, means, marker="o", markersize=3, label=label)
            if stds.any():
                ax.fill_between(xs, means - stds, means + stds, alpha=0.2)
        ax.set_title(variant, fontsize=9)
        ax.set_xlabel("swept value")
    axes[0].set_ylabel("acceptance probability")
    axes[0].legend()


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written path.

    Raises FigureError (and writes nothing) on empty input, unknown
    kinds, or missing columns.
    """
    table = load_table(spec.csv_path)
    with plt.rc_context(_STYLE):
        if spec.kind == "per-class":
            fig = plt.figure(figsize=(3.0 * len(_variants(table)) + 1, 3.2))
            render_per_class(spec, table, fig)
        else:
            fig, ax = plt.subplots()
            if spec.kind == "curve":
                render_curve(spec, table, ax)
            else:
                render_sweep(spec, table, ax)
        fig.tight_layout()
        spec.out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out_path, format="png", metadata=dict(_PNG_METADATA))
        plt.close(fig)
    return spec.out_path
