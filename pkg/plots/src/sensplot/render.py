"""Render per-epoch sensitivity curves with min-max bands from training CSVs.

Input files follow the training-log schema

    epoch,loss,val_auc,sens_avg,sens_min,sens_max

where the three sensitivity columns are empty on epochs without a report.
One CSV per model variant; all variants must share the same logged-epoch
grid. The figure shows a solid mean line and a shaded min-max band per
variant, with the graph's hyperbolicity value in the title.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = "epoch,loss,val_auc,sens_avg,sens_min,sens_max"


class SchemaError(ValueError):
    """CSV does not match the documented training-log schema."""


@dataclass
class Series:
    label: str
    epochs: np.ndarray
    avg: np.ndarray
    low: np.ndarray
    high: np.ndarray


@dataclass
class FigureSpec:
    csv_paths: list
    labels: list
    delta: float
    out_path: Path
    log_y: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.csv_paths) != len(self.labels):
            raise SchemaError(
                f"{len(self.csv_paths)} CSV paths but {len(self.labels)} labels"
            )
        if not self.csv_paths:
            raise SchemaError("at least one CSV is required")


def read_series(path, label: str) -> Series:
    """Parse one training CSV, keeping only epochs that carry a report."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].strip()
    if header != EXPECTED_HEADER:
        raise SchemaError(
            f"{path}: unexpected columns {header!r}; expected {EXPECTED_HEADER!r}"
        )
    epochs, avg, low, high = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise SchemaError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
        if parts[3] == "" and parts[4] == "" and parts[5] == "":
            continue
        try:
            epochs.append(int(parts[0]))
            avg.append(float(parts[3]))
            low.append(float(parts[4]))
            high.append(float(parts[5]))
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: non-numeric value") from None
    if not epochs:
        raise SchemaError(f"{path}: no epochs with sensitivity values")
    return Series(
        label=label,
        epochs=np.asarray(epochs),
        avg=np.asarray(avg),
        low=np.asarray(low),
        high=np.asarray(high),
    )


def render_sensitivity_figure(spec: FigureSpec):
    """Write the figure and return the matplotlib Figure object."""
    series = [read_series(p, lab) for p, lab in zip(spec.csv_paths, spec.labels)]
    grid = series[0].epochs
    for s in series[1:]:
        if not np.array_equal(s.epochs, grid):
            raise SchemaError(
                f"epoch grids differ: {series[0].label} has {grid.tolist()}, "
                f"{s.label} has {s.epochs.tolist()}"
            )

    fig, ax = plt.subplots(figsize=(7.0, 4.2), dpi=120)
    for s in series:
        (line,) = ax.plot(s.epochs, s.avg, label=s.label, linewidth=1.8)
        ax.fill_between(s.epochs, s.low, s.high, color=line.get_color(), alpha=0.2,
                        linewidth=0)
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("Jacobian spectral norm")
    ax.set_title(f"Sensitivity across distant pairs (delta = {spec.delta:g})")
    ax.legend()
    fig.tight_layout()
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    # pin the PNG metadata so re-renders are byte-stable
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)
    return fig
