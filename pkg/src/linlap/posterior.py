"""Laplace posterior covariance representations.

Three interchangeable forms of Psi = (sum_i J^T H J + lam I)^-1:

* Full: the precision V V^T + lam I is materialized and Cholesky-solved.
* Diagonal: only the GGN diagonal is kept; applies are elementwise.
* KFAC: per-layer Kronecker factors; lam enters exactly through the
  shared Kronecker eigenbasis, so a single-layer network reproduces the
  full posterior.

Evaluation-side quadratic forms P^T Psi^-1 P never build Psi at all;
they stream over the factor's columns (V P)^T (V P) + lam P^T P.
"""

import numpy as np

from . import curvature, linalg, model
from .errors import CapacityError, DimensionError

QUADFORM_COL_BATCH = 1024


class FullPosterior:
    """Materialized precision with a cached Cholesky factor."""

    kind = "full"

    def __init__(self, precision, lam):
        self.lam = float(lam)
        self.precision = np.asarray(precision, dtype=np.float64)
        self.p = self.precision.shape[0]
        import scipy.linalg as sla
        self._cho = sla.cho_factor(self.precision, lower=True,
                                   check_finite=False)

    @classmethod
    def from_factor(cls, factor, lam):
        if factor.p > curvature.FULL_GGN_MAX_P:
            raise CapacityError(
                f"p={factor.p} exceeds full-posterior cap "
                f"{curvature.FULL_GGN_MAX_P}")
        precision = curvature.ggn_full(factor)
        precision[np.diag_indices_from(precision)] += lam
        return cls(precision, lam)

    def apply_psi(self, m):
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.p:
            raise DimensionError(f"expected {self.p} rows, got {m.shape[0]}")
        import scipy.linalg as sla
        return sla.cho_solve(self._cho, m, check_finite=False)

    def variance_diag(self):
        return np.diag(self.apply_psi(np.eye(self.p))).copy()


class DiagonalPosterior:
    """Psi approximated by 1 / (ggn_diag + lam) elementwise."""

    kind = "diagonal"

    def __init__(self, data_diag, lam):
        self.lam = float(lam)
        d = np.asarray(data_diag, dtype=np.float64)
        if np.any(d < -1e-12):
            raise ValueError("data diagonal must be nonnegative")
        self.precision_diag = np.clip(d, 0.0, None) + self.lam
        self.p = d.shape[0]

    @classmethod
    def from_factor(cls, factor, lam):
        return cls(curvature.ggn_diag(factor), lam)

    def apply_psi(self, m):
        m = np.asarray(m, dtype=np.float64)
        if m.shape[0] != self.p:
            raise DimensionError(f"expected {self.p} rows, got {m.shape[0]}")
        if m.ndim == 1:
            return m / self.precision_diag
        return m / self.precision_diag[:, None]

    def variance_diag(self):
        return 1.0 / self.precision_diag


class KfacPosterior:
    """Per-layer Kronecker approximation (1/N) G (x) A + lam I.

    Both Kronecker factors are eigendecomposed once; the prior precision
    adds exactly in the shared eigenbasis, keeping the apply an O(layer)
    rotation plus an elementwise divide.
    """

    kind = "kfac"

    def __init__(self, factors: curvature.KfacFactors, lam):
        self.lam = float(lam)
        self.spec = factors.spec
        self.N = factors.N
        self.p = model.param_count(factors.spec)
        self._layers = []
        for a, g in zip(factors.A, factors.G):
            ea = linalg.sym_eig(a)
            eg = linalg.sym_eig(g)
            # (j, k) entry: eigenvalue of (1/N) G (x) A plus lam.
            denom = (np.clip(eg.values, 0.0, None)[:, None]
                     * np.clip(ea.values, 0.0, None)[None, :]) / factors.N \
                + self.lam
            self._layers.append((ea.vectors, eg.vectors, denom))

    def _apply_layer(self, idx, mat):
        ev_a, ev_g, denom = self._layers[idx]
        tilde = ev_g.T @ mat @ ev_a
        return ev_g @ (tilde / denom) @ ev_a.T

    def apply_psi(self, m):
        m = np.asarray(m, dtype=np.float64)
        squeeze = m.ndim == 1
        if squeeze:
            m = m[:, None]
        if m.shape[0] != self.p:
            raise DimensionError(f"expected {self.p} rows, got {m.shape[0]}")
        out = np.empty_like(m)
        for l, (w_sl, b_sl, n_in, n_out) in enumerate(
                model.layer_slices(self.spec)):
            for k in range(m.shape[1]):
                w = m[w_sl, k].reshape(n_out, n_in)
                b = m[b_sl, k]
                stacked = np.hstack([w, b[:, None]])
                res = self._apply_layer(l, stacked)
                out[w_sl, k] = res[:, :n_in].ravel()
                out[b_sl, k] = res[:, n_in]
        return out[:, 0] if squeeze else out

    def variance_diag(self):
        diag = np.empty(self.p)
        for l, (w_sl, b_sl, n_in, n_out) in enumerate(
                model.layer_slices(self.spec)):
            ev_a, ev_g, denom = self._layers[l]
            var = (ev_g ** 2) @ (1.0 / denom) @ (ev_a.T ** 2)
            diag[w_sl] = var[:, :n_in].ravel()
            diag[b_sl] = var[:, n_in]
        return diag


def build_posterior(kind, lam, factor=None, kfac=None):
    """Factory over the three representations."""
    if lam <= 0:
        raise ValueError("prior precision lam must be positive")
    if kind == "full":
        return FullPosterior.from_factor(factor, lam)
    if kind == "diagonal":
        return DiagonalPosterior.from_factor(factor, lam)
    if kind == "kfac":
        return KfacPosterior(kfac, lam)
    raise ValueError(f"unknown posterior kind {kind!r}")


def apply_psi_inv_quadform(factor, lam, proj, col_batch=QUADFORM_COL_BATCH):
    """P^T Psi^-1 P = (V P)^T (V P) + lam P^T P, streamed over V columns.

    This is the exact GGN precision quadratic form; it never materializes
    V V^T, so it stays usable at parameter counts where the full
    posterior does not.
    """
    proj = np.asarray(proj, dtype=np.float64)
    if proj.ndim == 1:
        proj = proj[:, None]
    if proj.shape[0] != factor.p:
        raise DimensionError(
            f"projector has {proj.shape[0]} rows, expected {factor.p}")
    s = proj.shape[1]
    acc = lam * (proj.T @ proj)
    total_cols = factor.V.shape[1]
    for start in range(0, total_cols, col_batch):
        w = factor.V[:, start:start + col_batch].T @ proj  # (batch, s)
        acc += w.T @ w
    return 0.5 * (acc + acc.T)


def posterior_variance_diag(post):
    """Elementwise diagonal of Psi for any representation."""
    return post.variance_diag()
