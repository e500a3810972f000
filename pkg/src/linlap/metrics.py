"""Evaluation metrics for subspace posterior models.

The primary quality measure is the relative Frobenius error between the
full and the subspace epistemic covariance.  When the full covariance is
unavailable the trace of the subspace covariance ranks projectors
instead; ordering_agreement quantifies how often the two rankings
coincide.  NLL is computed for completeness but deliberately excluded
from any ranking logic.
"""

import csv
import math
import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import NumericError, UndefinedMetricError
from .linalg import frob_norm
from .predictive import CategoricalPred, GaussianPred

LOG_2PI = float(np.log(2.0 * np.pi))

REPORT_COLUMNS = ("dataset", "method", "s", "seed", "rel_error", "trace",
                  "log_trace", "nll")

ORDERING_TIE_TOL = 1e-12


@dataclass(frozen=True)
class MetricsReport:
    dataset: str
    method: str
    s: int
    seed: int
    rel_error: float | None
    trace: float
    log_trace: float | None
    nll: float


def make_report(dataset, method, s, seed, trace, nll, rel_error=None):
    log_trace = math.log(trace) if trace > 0.0 else None
    return MetricsReport(dataset=dataset, method=method, s=s, seed=seed,
                         rel_error=rel_error, trace=trace,
                         log_trace=log_trace, nll=nll)


def relative_error(cov_x, cov_p):
    """|Sigma_X - Sigma_P|_F / |Sigma_X|_F."""
    if cov_x.sigma.shape != cov_p.sigma.shape:
        raise ValueError("covariance shapes differ")
    denom = frob_norm(cov_x.sigma)
    if denom == 0.0:
        raise UndefinedMetricError("reference covariance has zero norm")
    return frob_norm(cov_x.sigma - cov_p.sigma) / denom


def trace_criterion(cov):
    """Tr Sigma_P; larger means more of the dominant eigenspace captured."""
    return cov.trace()


def nll(pred, y):
    """Averaged negative log predictive density on the test points.

    Regression uses the joint Gaussian over all n*C outputs divided by
    the number of test points; classification averages -ln p(y_i).
    """
    if isinstance(pred, GaussianPred):
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape != pred.mean.shape:
            raise ValueError(
                f"targets have shape {y.shape}, expected {pred.mean.shape}")
        dim = pred.mean.shape[0]
        n_points = pred.n if pred.n else dim
        try:
            cho = scipy.linalg.cho_factor(pred.total_cov, lower=True,
                                          check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise NumericError("total predictive covariance is singular"
                               ) from exc
        resid = y - pred.mean
        quad = float(resid @ scipy.linalg.cho_solve(cho, resid,
                                                    check_finite=False))
        logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
        return 0.5 * (quad + logdet + dim * LOG_2PI) / n_points
    if isinstance(pred, CategoricalPred):
        y = np.asarray(y).astype(np.int64).ravel()
        probs = pred.probs[np.arange(len(y)), y]
        if np.any(probs <= 0.0):
            return float("inf")
        return float(-np.mean(np.log(probs)))
    raise TypeError(f"unsupported predictive {type(pred).__name__}")


def nll_pointwise(pred, y):
    """Diagonal-only per-point Gaussian NLL, averaged (comparability aid)."""
    if not isinstance(pred, GaussianPred):
        raise TypeError("pointwise NLL is defined for Gaussian predictives")
    y = np.asarray(y, dtype=np.float64).ravel()
    var = np.diag(pred.total_cov)
    if np.any(var <= 0.0):
        raise NumericError("nonpositive predictive variance")
    resid = y - pred.mean
    per_out = 0.5 * (resid ** 2 / var + np.log(var) + LOG_2PI)
    n_points = pred.n if pred.n else len(y)
    return float(np.sum(per_out) / n_points)


def parameter_sensitivity(jac):
    """Mean absolute Jacobian entry per parameter (over samples/outputs)."""
    return np.abs(jac.matrix).mean(axis=0)


def sensitivity_matrix(jac):
    """Per-sample parameter sensitivities (n, p): mean |J| over outputs."""
    m = np.abs(jac.matrix).reshape(jac.n, jac.C, -1)
    return m.mean(axis=1)


def dead_parameter_fraction(jac, threshold_rel=1e-6):
    """Fraction of parameters whose sensitivity is below the relative
    threshold times the most sensitive parameter."""
    sens = parameter_sensitivity(jac)
    top = sens.max(initial=0.0)
    if top == 0.0:
        return 1.0
    return float(np.mean(sens < threshold_rel * top))


def ordering_agreement(reports):
    """Fraction of method pairs where the trace ranks like the relative
    error (higher trace <-> lower error).

    Reports are grouped by (dataset, s); within a group each method's
    rel_error and trace are averaged over seeds before comparison.  Pairs
    tied within 1e-12 on either metric are excluded; returns None when no
    countable pair exists.
    """
    groups = {}
    for r in reports:
        if r.rel_error is None:
            continue
        groups.setdefault((r.dataset, r.s), {}).setdefault(
            r.method, []).append(r)
    agree = 0
    total = 0
    for (_, _), methods in sorted(groups.items()):
        means = {
            m: (float(np.mean([r.rel_error for r in rs])),
                float(np.mean([r.trace for r in rs])))
            for m, rs in methods.items()
        }
        for m1, m2 in combinations(sorted(means), 2):
            rel1, tr1 = means[m1]
            rel2, tr2 = means[m2]
            if abs(tr1 - tr2) <= ORDERING_TIE_TOL:
                continue
            if abs(rel1 - rel2) <= ORDERING_TIE_TOL:
                continue
            total += 1
            if (tr1 > tr2) == (rel1 < rel2):
                agree += 1
    if total == 0:
        return None
    return agree / total


def _format_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_reports(reports, path):
    """Emit the per-run CSV schema consumed by the report/plot tooling."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([
                r.dataset, r.method, r.s, r.seed,
                _format_value(r.rel_error), _format_value(r.trace),
                _format_value(r.log_trace), _format_value(r.nll),
            ])
    os.replace(tmp, path)


def read_reports(path, on_bad_row=None):
    """Parse a per-run CSV; malformed rows are skipped via on_bad_row."""
    reports = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader, start=2):
            try:
                reports.append(MetricsReport(
                    dataset=row["dataset"],
                    method=row["method"],
                    s=int(row["s"]),
                    seed=int(row["seed"]),
                    rel_error=float(row["rel_error"]) if row["rel_error"]
                    else None,
                    trace=float(row["trace"]),
                    log_trace=float(row["log_trace"]) if row["log_trace"]
                    else None,
                    nll=float(row["nll"]),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                if on_bad_row is not None:
                    on_bad_row(i, exc)
    return reports
