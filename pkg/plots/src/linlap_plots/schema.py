"""Readers for the experiment pipeline's CSV schemas.

Per-run metrics: dataset,method,s,seed,rel_error,trace,log_trace,nll
(empty cells mean the value is absent, e.g. log_trace of a zero trace).
Sensitivity: header param_0..param_{p-1}, one row of mean absolute
Jacobian entries per sample.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

RUN_COLUMNS = ("dataset", "method", "s", "seed", "rel_error", "trace",
               "log_trace", "nll")


class SchemaError(ValueError):
    """A CSV file does not match the published schema."""


@dataclass(frozen=True)
class RunRow:
    dataset: str
    method: str
    s: int
    seed: int
    rel_error: float | None
    trace: float
    log_trace: float | None
    nll: float


def _opt_float(cell):
    if cell == "":
        return None
    value = float(cell)
    if not math.isfinite(value):
        return None
    return value


def load_runs(paths):
    """Read one or more per-run CSVs; raises SchemaError on a missing
    column, skips rows that fail to parse."""
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in RUN_COLUMNS
                       if c not in (reader.fieldnames or ())]
            if missing:
                raise SchemaError(
                    f"{path}: missing column(s) {', '.join(missing)}")
            for raw in reader:
                try:
                    rows.append(RunRow(
                        dataset=raw["dataset"], method=raw["method"],
                        s=int(raw["s"]), seed=int(raw["seed"]),
                        rel_error=_opt_float(raw["rel_error"]),
                        trace=float(raw["trace"]),
                        log_trace=_opt_float(raw["log_trace"]),
                        nll=float(raw["nll"])))
                except (TypeError, ValueError):
                    continue
    return rows


def load_sensitivity(path):
    """Sensitivity matrix (samples x parameters) from its CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not header[0].startswith("param_"):
            raise SchemaError(f"{path}: expected a param_* header row")
        data = [[float(c) for c in row] for row in reader if row]
    if not data:
        raise SchemaError(f"{path}: no sensitivity rows")
    mat = np.asarray(data, dtype=np.float64)
    if mat.shape[1] != len(header):
        raise SchemaError(f"{path}: ragged sensitivity rows")
    return mat


def aggregate_metric(rows, metric):
    """Per (method, s): seed mean and sample standard error of a metric.

    Absent values make the whole (method, s) cell absent (NaN), which
    renders as a line gap.  Matches the pipeline's own aggregation.
    """
    if metric not in ("rel_error", "log_trace", "nll", "trace"):
        raise SchemaError(f"unknown metric {metric!r}")
    cells = {}
    for r in rows:
        cells.setdefault((r.method, r.s), []).append(getattr(r, metric))
    out = {}
    for (method, s), values in cells.items():
        if any(v is None for v in values):
            mean, stderr = float("nan"), float("nan")
        else:
            mean = float(np.mean(values))
            stderr = (float(np.std(values, ddof=1) / np.sqrt(len(values)))
                      if len(values) > 1 else 0.0)
        out.setdefault(method, {})[s] = (mean, stderr)
    return out
