"""Projector construction: coordinate subsets and low-rank subspace maps.

A projector P (p x s, full column rank) restricts inference to the
affine family theta_hat + P mu.  Subset kinds pick coordinates by a
score vector; low-rank kinds chain an approximate posterior apply with
the dominant eigenvectors of the approximate epistemic covariance on a
construction input set; the optimal kind does the same with the exact
posterior on the evaluation inputs, which provably attains the best
rank-s predictive covariance.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import binio, linalg, posterior
from .errors import RankError

PROJECTOR_MAGIC = b"LLPJ"

# Relative eigenvalue cutoff used to decide the usable subspace rank.
RANK_RTOL = 1e-10


class ProjectorKind(str, Enum):
    SUBSET_MAGNITUDE = "subset-magnitude"
    SUBSET_DIAGONAL = "subset-diagonal"
    SUBSET_SWAG = "subset-swag"
    LOWRANK_DIAGONAL = "lowrank-diagonal"
    LOWRANK_KFAC = "lowrank-kfac"
    LOWRANK_OPT_GGN = "lowrank-opt-ggn"
    FULL = "none-full"


SUBSET_KINDS = (ProjectorKind.SUBSET_MAGNITUDE,
                ProjectorKind.SUBSET_DIAGONAL,
                ProjectorKind.SUBSET_SWAG)


@dataclass(frozen=True)
class Projector:
    P: np.ndarray  # (p, s)
    kind: ProjectorKind

    def __post_init__(self):
        p = np.asarray(self.P, dtype=np.float64)
        object.__setattr__(self, "P", p)
        gram_eigs = np.linalg.eigvalsh(p.T @ p)
        if gram_eigs[0] <= 1e-12 * gram_eigs[-1]:
            raise RankError(
                f"projector columns are rank deficient "
                f"(gram eigs {gram_eigs[0]:.3e}..{gram_eigs[-1]:.3e})")

    @property
    def s(self):
        return self.P.shape[1]

    @property
    def p(self):
        return self.P.shape[0]


def subset_projector(scores, s, kind):
    """Canonical-basis columns for the s largest scores (ties: lower index)."""
    scores = np.asarray(scores, dtype=np.float64)
    p = scores.shape[0]
    if not 1 <= s <= p:
        raise ValueError(f"s={s} out of range for p={p}")
    order = np.argsort(-scores, kind="stable")[:s]
    mat = np.zeros((p, s))
    mat[order, np.arange(s)] = 1.0
    return Projector(P=mat, kind=kind)


def _usable_rank(eigvals):
    top = eigvals[0] if len(eigvals) else 0.0
    if top <= 0.0:
        return 0
    return int(np.sum(eigvals > RANK_RTOL * top))


@dataclass(frozen=True)
class LowrankBasis:
    """Reusable pieces of the low-rank construction: Psi J'^T and the
    eigendecomposition of J' Psi J'^T.  Projectors for different s nest,
    so one basis serves a whole sweep over subspace dimensions."""

    psi_jt: np.ndarray
    eig: linalg.SymEig
    rank: int

    def projector(self, s, kind):
        if not 1 <= s <= self.psi_jt.shape[1]:
            raise ValueError(f"s={s} out of range")
        if s > self.rank:
            raise RankError(
                f"requested s={s} exceeds usable rank {self.rank} of the "
                f"construction covariance", max_usable=self.rank)
        return Projector(P=self.psi_jt @ self.eig.vectors[:, :s], kind=kind)


def lowrank_basis(post, jac_constr):
    j = jac_constr.matrix
    psi_jt = post.apply_psi(j.T)           # (p, nC)
    m = j @ psi_jt                          # (nC, nC)
    eig = linalg.sym_eig(0.5 * (m + m.T))
    return LowrankBasis(psi_jt=psi_jt, eig=eig, rank=_usable_rank(eig.values))


def lowrank_projector(post, jac_constr, s, kind):
    """P = Psi_approx J'^T U_s with U_s from eig(J' Psi_approx J'^T)."""
    nc, p = jac_constr.matrix.shape
    if not 1 <= s <= min(nc, p):
        raise ValueError(f"s={s} out of range for min(nC={nc}, p={p})")
    return lowrank_basis(post, jac_constr).projector(s, kind)


def optimal_projector(factor, lam, jac_eval, s, post=None):
    """Exact-posterior construction on the evaluation inputs.

    Builds Psi = (V V^T + lam I)^-1 (capacity-guarded), eigendecomposes
    Sigma_X = J Psi J^T, and returns Psi J^T U_s.  Pass a prebuilt full
    posterior to amortize the Cholesky across subspace dimensions.
    """
    if post is None:
        post = posterior.FullPosterior.from_factor(factor, lam)
    j = jac_eval.matrix
    nc, p = j.shape
    if not 1 <= s <= min(nc, p):
        raise ValueError(f"s={s} out of range for min(nC={nc}, p={p})")
    psi_jt = post.apply_psi(j.T)
    sigma_x = j @ psi_jt
    eig = linalg.sym_eig(0.5 * (sigma_x + sigma_x.T))
    rank = _usable_rank(eig.values)
    if s > rank:
        raise RankError(
            f"requested s={s} exceeds rank {rank} of the evaluation "
            f"covariance", max_usable=rank)
    return Projector(P=psi_jt @ eig.vectors[:, :s],
                     kind=ProjectorKind.LOWRANK_OPT_GGN)


def full_projector(p):
    """Identity map: the regular Laplace approximation without reduction."""
    return Projector(P=np.eye(p), kind=ProjectorKind.FULL)


def gauge_invariance_check(proj, q, sigma_builder):
    """Relative discrepancy between Sigma_{PQ,X} and Sigma_{P,X}.

    sigma_builder maps a raw p x s matrix to its epistemic covariance;
    the result should vanish for any invertible Q.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape[0] != q.shape[1] or q.shape[0] != proj.s:
        raise ValueError(f"Q must be {proj.s}x{proj.s}, got {q.shape}")
    if np.linalg.cond(q) >= 1e8:
        raise ValueError("Q is too ill-conditioned to count as invertible")
    base = sigma_builder(proj.P)
    gauged = sigma_builder(proj.P @ q)
    denom = linalg.frob_norm(base)
    return linalg.frob_norm(gauged - base) / denom


def save_projector(proj, path):
    binio.write_matrix(path, PROJECTOR_MAGIC, proj.kind.value, [], proj.P)


def load_projector(path):
    tag, _, mat = binio.read_matrix(path, PROJECTOR_MAGIC)
    return Projector(P=mat, kind=ProjectorKind(tag))
