"""Dense symmetric linear-algebra kernels used by every other module.

All routines work on 64-bit float ndarrays.  Eigenvectors follow a fixed
sign convention (first significantly nonzero component positive) so that
repeated runs produce identical factors.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotPositiveDefiniteError, NumericError

# Relative asymmetry tolerated before sym_eig refuses the input.
SYMMETRY_RTOL = 1e-9

# Jitter scale for the single solve_spd retry: 1e-10 * trace/dim.
SPD_JITTER_RTOL = 1e-10


@dataclass(frozen=True)
class SymEig:
    """Symmetric eigendecomposition with eigenvalues sorted descending."""

    values: np.ndarray   # (k,), non-increasing
    vectors: np.ndarray  # (n, k), columns are eigenvectors


def _as_float_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite entries")
    return a


def _fix_signs(vectors):
    """Flip eigenvector columns so the first significant entry is positive."""
    v = vectors.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        big = np.abs(col).max()
        if big == 0.0:
            continue
        idx = np.argmax(np.abs(col) > 1e-12 * big)
        if col[idx] < 0:
            v[:, j] = -col
    return v


def sym_eig(a):
    """Full eigendecomposition of a symmetric matrix, values descending.

    The input is symmetrized as (A + A^T)/2 before factorization; inputs
    that are asymmetric beyond ``SYMMETRY_RTOL`` (relative, Frobenius) are
    rejected.
    """
    a = _as_float_matrix(a)
    n, m = a.shape
    if n != m:
        raise DimensionError(f"expected a square matrix, got {n}x{m}")
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric within tolerance")
    sym = 0.5 * (a + a.T)
    values, vectors = scipy.linalg.eigh(sym)
    order = np.argsort(values, kind="stable")[::-1]
    return SymEig(values=values[order], vectors=_fix_signs(vectors[:, order]))


def truncated_eig(a, s):
    """Top-``s`` eigenpairs of a symmetric PSD matrix.

    Computed by slicing the full decomposition, so the values agree with
    :func:`sym_eig` exactly.
    """
    a = _as_float_matrix(a)
    if not 1 <= s <= a.shape[0]:
        raise ValueError(f"s={s} out of range for a {a.shape[0]}-dim matrix")
    full = sym_eig(a)
    return SymEig(values=full.values[:s], vectors=full.vectors[:, :s])


def solve_spd(a, b):
    """Solve A X = B for symmetric positive-definite A via Cholesky.

    One retry with ``1e-10 * trace(A)/n`` added to the diagonal absorbs
    PSD-but-singular inputs (rank-deficient Jacobian Grams); anything
    still failing raises :class:`NotPositiveDefiniteError`.
    """
    a = _as_float_matrix(a, "A")
    n, m = a.shape
    if n != m:
        raise DimensionError(f"A must be square, got {n}x{m}")
    b_arr = np.asarray(b, dtype=np.float64)
    squeeze = b_arr.ndim == 1
    if squeeze:
        b_arr = b_arr[:, None]
    if b_arr.shape[0] != n:
        raise DimensionError(
            f"B has {b_arr.shape[0]} rows, expected {n}")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        jitter = SPD_JITTER_RTOL * np.trace(a) / n
        try:
            factor = scipy.linalg.cho_factor(
                a + jitter * np.eye(n), lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                "Cholesky failed even with jitter; matrix is not positive "
                "definite") from exc
    x = scipy.linalg.cho_solve(factor, b_arr, check_finite=False)
    return x[:, 0] if squeeze else x


def frob_norm(a):
    """Frobenius norm sqrt(sum of squared entries)."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))
