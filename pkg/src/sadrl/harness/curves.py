"""Learning-curve aggregation across runs.

Each training log contributes the (update, eval_score) points of its
completed evaluations.  Runs evaluate at slightly different updates, so all
runs are resampled onto the union of their grids by linear interpolation
(clamped at the ends) before averaging.  Output columns: steps,mean,sem.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .runner import LOG_HEADER


class CurveError(ValueError):
    """Missing or malformed training logs."""


def read_eval_points(log_path) -> tuple[np.ndarray, np.ndarray]:
    """Extract (updates, eval scores) from one training log."""
    path = Path(log_path)
    if not path.exists():
        raise CurveError(f"training log not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LOG_HEADER.split(","):
            raise CurveError(f"{path} is not a training log (header {header})")
        steps, values = [], []
        for row in reader:
            if len(row) != 5:
                raise CurveError(f"{path}: malformed row {row}")
            if row[4] != "":
                steps.append(int(row[0]))
                values.append(float(row[4]))
    if not steps:
        raise CurveError(f"{path} contains no evaluation points")
    return np.asarray(steps, dtype=np.int64), np.asarray(values, dtype=np.float64)


def aggregate_curves(log_paths) -> np.ndarray:
    """Rows of (step, mean, sem) across the given runs."""
    log_paths = list(log_paths)
    if not log_paths:
        raise CurveError("at least one training log is required")
    runs = [read_eval_points(p) for p in log_paths]
    grid = np.unique(np.concatenate([steps for steps, _ in runs]))
    resampled = np.stack(
        [np.interp(grid, steps, values) for steps, values in runs]
    )
    mean = resampled.mean(axis=0)
    if len(runs) > 1:
        sem = resampled.std(axis=0, ddof=1) / np.sqrt(len(runs))
    else:
        sem = np.zeros_like(mean)
    return np.column_stack([grid.astype(np.float64), mean, sem])


def emit_curves(log_paths, out_path) -> Path:
    rows = aggregate_curves(log_paths)
    out_path = Path(out_path)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["steps", "mean", "sem"])
        for step, mean, sem in rows:
            writer.writerow([int(step), f"{mean:.6f}", f"{sem:.6f}"])
    return out_path
