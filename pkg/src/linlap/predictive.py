"""Epistemic predictive covariances and the closed-form predictives.

Sigma_X = J Psi J^T is what the full Laplace approximation predicts;
a subspace model replaces it by Sigma_{P,X} = A K^-1 A^T with A = J P
and K = P^T Psi^-1 P.  Neither Psi nor Psi^-1 is ever materialized on
the subspace path.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg, model, posterior
from .errors import NotPositiveDefiniteError, NumericError, RankError

PROBIT_SCALE = np.pi / 8.0


@dataclass(frozen=True)
class EpistemicCov:
    """Symmetric PSD covariance over the stacked outputs of n inputs."""

    sigma: np.ndarray  # (n*C, n*C)
    n: int
    C: int

    def trace(self):
        return float(np.trace(self.sigma))


@dataclass(frozen=True)
class GaussianPred:
    mean: np.ndarray       # (n*C,)
    total_cov: np.ndarray  # (n*C, n*C), epistemic + sigma^2 I
    n: int = 0             # number of test points (blocks of C outputs)
    C: int = 1


@dataclass(frozen=True)
class CategoricalPred:
    probs: np.ndarray  # (n, C)


def epistemic_cov_full(jac, post):
    """Sigma_X = J Psi J^T, symmetrized."""
    j = jac.matrix
    s = j @ post.apply_psi(j.T)
    return EpistemicCov(sigma=0.5 * (s + s.T), n=jac.n, C=jac.C)


def epistemic_cov_subspace(jac, proj, factor, lam):
    """Sigma_{P,X} = (J P) (P^T Psi^-1 P)^-1 (J P)^T via the exact GGN."""
    a = jac.matrix @ proj.P
    k = posterior.apply_psi_inv_quadform(factor, lam, proj.P)
    try:
        x = linalg.solve_spd(k, a.T)
    except NotPositiveDefiniteError as exc:
        raise RankError(
            "subspace precision P^T Psi^-1 P is numerically singular; "
            "the projector is effectively rank deficient") from exc
    s = a @ x
    return EpistemicCov(sigma=0.5 * (s + s.T), n=jac.n, C=jac.C)


def subspace_cov_trace(jac, proj, factor, lam):
    """Tr Sigma_{P,X} without forming the nC x nC matrix."""
    a = jac.matrix @ proj.P
    k = posterior.apply_psi_inv_quadform(factor, lam, proj.P)
    try:
        x = linalg.solve_spd(k, a.T)
    except NotPositiveDefiniteError as exc:
        raise RankError(
            "subspace precision P^T Psi^-1 P is numerically singular"
        ) from exc
    return float(np.einsum("ij,ji->", a, x))


def predict_regression(net, x, cov, sigma):
    """Joint Gaussian predictive: mean f(X), covariance Sigma + sigma^2 I."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0 and linalg.frob_norm(cov.sigma) == 0.0:
        raise NumericError(
            "predictive would be a point mass: sigma <= 0 and zero "
            "epistemic covariance")
    mean = model.forward(net, x).ravel()
    total = cov.sigma + sigma ** 2 * np.eye(cov.sigma.shape[0])
    return GaussianPred(mean=mean, total_cov=total, n=cov.n, C=cov.C)


def predict_classification_probit(net, x, cov):
    """Probit-scaled softmax using only the diagonal of Sigma."""
    logits = model.forward(net, x)
    n, c = logits.shape
    diag = np.diag(cov.sigma).reshape(n, c)
    if np.min(diag) < -1e-8:
        raise NumericError(
            f"epistemic variance diagonal has entry {np.min(diag):.3e} "
            "below the roundoff tolerance")
    diag = np.clip(diag, 0.0, None)
    scaled = logits / np.sqrt(1.0 + PROBIT_SCALE * diag)
    scaled = scaled - scaled.max(axis=1, keepdims=True)
    e = np.exp(scaled)
    return CategoricalPred(probs=e / e.sum(axis=1, keepdims=True))
