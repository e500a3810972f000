"""Curvature objects built from Jacobians and output-space Hessians.

Everything here follows the unaveraged-sum convention: the factor V
satisfies V V^T = sum_i J_i^T H_i J_i, so the Laplace precision is
V V^T + lam * I without further scaling.  H_i is sigma^-2 * I for
Gaussian regression and diag(phi) - phi phi^T for softmax classifiers;
both admit the exact square roots used to assemble V column-block by
column-block.
"""

from dataclasses import dataclass

import numpy as np

from . import binio, model
from .data import Classification, Regression
from .errors import CapacityError

FACTOR_MAGIC = b"LLVF"

# Hard cap on materializing p x p GGN matrices.
FULL_GGN_MAX_P = 25_000
# Cap on p for the finite-difference Hessian (validation only).
FD_HESSIAN_MAX_P = 500
# Cap on total entries of V (p * N * C).
FACTOR_MAX_ENTRIES = int(2e8)

_JACOBIAN_BATCH = 64


@dataclass(frozen=True)
class CurvatureFactor:
    """V with V V^T = sum_i J_i^T H_i J_i; columns grouped per sample."""

    V: np.ndarray  # (p, N*C)
    N: int
    C: int

    @property
    def p(self):
        return self.V.shape[0]


@dataclass(frozen=True)
class KfacFactors:
    """Per-layer Kronecker factors (unaveraged sums over N samples).

    A[l] is the Gram of bias-augmented layer inputs, G[l] the
    curvature-weighted second moment of layer-output sensitivities; the
    layer's GGN block is approximately (1/N) G[l] (x) A[l] in the
    row-major [W | b] parameter layout.
    """

    A: list  # (in_l+1, in_l+1) per layer
    G: list  # (out_l, out_l) per layer
    N: int
    spec: model.NetworkSpec


def _sigma_for(task, sigma):
    if sigma is not None:
        return float(sigma)
    if isinstance(task, Regression):
        return float(task.sigma)
    return 1.0


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def output_hessian(f, task, sigma=None):
    """Hessian of the per-sample negative log-likelihood w.r.t. outputs."""
    f = np.asarray(f, dtype=np.float64).ravel()
    c = f.shape[0]
    if isinstance(task, Regression):
        return np.eye(c) / _sigma_for(task, sigma) ** 2
    phi = softmax(f)
    return np.diag(phi) - np.outer(phi, phi)


def output_hessian_sqrt(f, task, sigma=None):
    """B with B B^T = output_hessian.

    Regression: sigma^-1 * I.  Classification: diag(sqrt(phi)) -
    phi sqrt(phi)^T, an exact C-column factor needing no sampling.
    """
    f = np.asarray(f, dtype=np.float64).ravel()
    c = f.shape[0]
    if isinstance(task, Regression):
        return np.eye(c) / _sigma_for(task, sigma)
    phi = softmax(f)
    root = np.sqrt(phi)
    return np.diag(root) - np.outer(phi, root)


def _batch_sqrt_hessians(outputs, task, sigma):
    """Stacked B_i factors for a batch of outputs, shape (n, C, C)."""
    n, c = outputs.shape
    if isinstance(task, Regression):
        return np.broadcast_to(np.eye(c) / _sigma_for(task, sigma),
                               (n, c, c)).copy()
    phi = softmax(outputs)
    root = np.sqrt(phi)
    b = np.zeros((n, c, c))
    idx = np.arange(c)
    b[:, idx, idx] = root
    b -= phi[:, :, None] * root[:, None, :]
    return b


def curvature_factor(net, ds, sigma=None, batch_size=_JACOBIAN_BATCH):
    """Assemble V column-block by column-block over mini-batches."""
    p = model.param_count(net.spec)
    c = net.spec.output_dim
    n = ds.n
    if p * n * c > FACTOR_MAX_ENTRIES:
        raise CapacityError(
            f"factor would hold {p * n * c} entries "
            f"(cap {FACTOR_MAX_ENTRIES})")
    v = np.empty((p, n * c))
    for start in range(0, n, batch_size):
        xb = ds.X[start:start + batch_size]
        jac = model.jacobian(net, xb)
        nb = xb.shape[0]
        jb = jac.matrix.reshape(nb, c, p)
        outputs = model.forward(net, xb)
        bs = _batch_sqrt_hessians(outputs, ds.task, sigma)
        # column block for sample i: J_i^T B_i  (p x C)
        cols = np.einsum("icp,icd->ipd", jb, bs)
        v[:, start * c:(start + nb) * c] = cols.transpose(1, 0, 2).reshape(
            p, nb * c)
    return CurvatureFactor(V=v, N=n, C=c)


def ggn_full(factor):
    """Materialized V V^T; equals the unaveraged GGN sum."""
    if factor.p > FULL_GGN_MAX_P:
        raise CapacityError(
            f"p={factor.p} exceeds dense GGN cap {FULL_GGN_MAX_P}")
    return factor.V @ factor.V.T


def ggn_diag(factor):
    """Diagonal of V V^T computed streaming, never materializing it."""
    return np.einsum("ij,ij->i", factor.V, factor.V)


def kfac_factors(net, ds, sigma=None, batch_size=_JACOBIAN_BATCH):
    """Kronecker factors per layer from forward activations and the exact
    output-curvature square roots (expectation under the model's own
    predictive distribution)."""
    spec = net.spec
    widths = spec.layer_widths
    a_sums = [np.zeros((widths[i] + 1, widths[i] + 1))
              for i in range(spec.n_layers)]
    g_sums = [np.zeros((widths[i + 1], widths[i + 1]))
              for i in range(spec.n_layers)]
    for start in range(0, ds.n, batch_size):
        xb = ds.X[start:start + batch_size]
        acts, _, deriv = model._output_preact_jacobians(net, xb)
        bs = _batch_sqrt_hessians(acts[-1], ds.task, sigma)
        for l in range(spec.n_layers):
            aug = np.hstack([acts[l], np.ones((xb.shape[0], 1))])
            a_sums[l] += aug.T @ aug
            # S_l,i B_i with S = (df/dz_l)^T, contracted over outputs.
            sb = np.einsum("icj,icd->ijd", deriv[l], bs)
            g_sums[l] += np.einsum("ijd,ikd->jk", sb, sb)
    return KfacFactors(A=a_sums, G=g_sums, N=ds.n, spec=spec)


def _nll_gradient(net, x, y, task, lam, sigma):
    f = model.forward(net, x)
    if isinstance(task, Regression):
        g = (f - y) / _sigma_for(task, sigma) ** 2
    else:
        probs = softmax(f)
        g = probs.copy()
        g[np.arange(len(y)), y] -= 1.0
    return model.vjp(net, x, g) + lam * net.theta


def loss_hessian_fd(net, ds, lam=0.0, sigma=None, h=1e-5):
    """Central finite-difference Hessian of the summed negative
    log-likelihood (plus optional L2 term), symmetrized.  Validation-only:
    guarded to small parameter counts."""
    p = model.param_count(net.spec)
    if p > FD_HESSIAN_MAX_P:
        raise CapacityError(
            f"p={p} exceeds finite-difference cap {FD_HESSIAN_MAX_P}")
    hess = np.empty((p, p))
    theta = net.theta
    for j in range(p):
        dt = np.zeros(p)
        dt[j] = h
        gp = _nll_gradient(net.with_theta(theta + dt), ds.X, ds.Y, ds.task,
                           lam, sigma)
        gm = _nll_gradient(net.with_theta(theta - dt), ds.X, ds.Y, ds.task,
                           lam, sigma)
        hess[:, j] = (gp - gm) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def save_factor(factor, path):
    """Persist V with (N, C) metadata in the shared binary container."""
    binio.write_matrix(path, FACTOR_MAGIC, "", [factor.N, factor.C],
                       factor.V)


def load_factor(path):
    _, meta, v = binio.read_matrix(path, FACTOR_MAGIC)
    n, c = int(meta[0]), int(meta[1])
    return CurvatureFactor(V=v, N=n, C=c)
