"""MLP networks: forward evaluation and exact per-sample parameter Jacobians.

Parameters live in one flat vector.  Flattening order is layer by layer,
each layer's weight matrix row-major (out x in) followed by its bias;
coordinate projectors index into this order, so it must never change.
The hidden activation is ReLU with the subgradient convention
ReLU'(0) = 0.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: widths from input to output, ReLU hidden."""

    layer_widths: tuple
    activation: str = "relu"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w <= 0 for w in widths):
            raise ValueError(f"all widths must be positive, got {widths}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def input_dim(self):
        return self.layer_widths[0]

    @property
    def output_dim(self):
        return self.layer_widths[-1]

    @property
    def n_layers(self):
        return len(self.layer_widths) - 1


@dataclass(frozen=True)
class Network:
    """A spec plus its flat parameter vector."""

    spec: NetworkSpec
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        expected = param_count(self.spec)
        if theta.shape != (expected,):
            raise DimensionError(
                f"theta has shape {theta.shape}, expected ({expected},)")
        if not np.all(np.isfinite(theta)):
            raise NumericError("theta contains non-finite entries")

    def with_theta(self, theta):
        return Network(self.spec, theta)


@dataclass(frozen=True)
class Jacobian:
    """Stacked per-sample output Jacobians, one C-row block per input."""

    matrix: np.ndarray  # (n*C, p)
    n: int
    C: int


def param_count(spec):
    """Total number of parameters: sum over layers of (in+1)*out."""
    w = spec.layer_widths
    return sum((w[i] + 1) * w[i + 1] for i in range(len(w) - 1))


def layer_slices(spec):
    """Flat-vector slices per layer: (weight_slice, bias_slice, in, out)."""
    out = []
    offset = 0
    w = spec.layer_widths
    for i in range(len(w) - 1):
        n_in, n_out = w[i], w[i + 1]
        w_sl = slice(offset, offset + n_in * n_out)
        b_sl = slice(w_sl.stop, w_sl.stop + n_out)
        out.append((w_sl, b_sl, n_in, n_out))
        offset = b_sl.stop
    return out


def unflatten(spec, theta):
    """Split a flat vector into [(W, b)] with W of shape (out, in)."""
    layers = []
    for w_sl, b_sl, n_in, n_out in layer_slices(spec):
        layers.append((theta[w_sl].reshape(n_out, n_in), theta[b_sl]))
    return layers


def flatten(spec, layers):
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def init_network(spec, seed=0, scale="he"):
    """He-normal weight init (biases zero); deterministic given the seed."""
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(spec.n_layers):
        n_in, n_out = spec.layer_widths[i], spec.layer_widths[i + 1]
        std = np.sqrt(2.0 / n_in) if scale == "he" else 1.0 / np.sqrt(n_in)
        layers.append((rng.normal(0.0, std, size=(n_out, n_in)),
                       np.zeros(n_out)))
    return Network(spec, flatten(spec, layers))


def _check_inputs(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise DimensionError(
            f"inputs have shape {x.shape}, expected (n, {net.spec.input_dim})")
    if not np.all(np.isfinite(x)):
        raise NumericError("inputs contain non-finite entries")
    return x


def _forward_cache(net, x):
    """Forward pass keeping pre-activations; returns (activations, preacts)."""
    layers = unflatten(net.spec, net.theta)
    acts = [x]
    preacts = []
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        preacts.append(z)
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(h)
    return acts, preacts


def forward(net, x):
    """Network outputs, shape (n, C); final layer is linear (no softmax)."""
    x = _check_inputs(net, x)
    acts, _ = _forward_cache(net, x)
    return acts[-1]


def _output_preact_jacobians(net, x):
    """d f / d z_l for every layer l, plus the forward cache.

    Returns (acts, preacts, deriv) where deriv[l] has shape (n, C, out_l).
    """
    x = _check_inputs(net, x)
    layers = unflatten(net.spec, net.theta)
    acts, preacts = _forward_cache(net, x)
    n = x.shape[0]
    c = net.spec.output_dim
    deriv = [None] * len(layers)
    deriv[-1] = np.broadcast_to(np.eye(c), (n, c, c)).copy()
    for l in range(len(layers) - 1, 0, -1):
        w, _ = layers[l]
        # ReLU'(0) = 0: strict inequality on the pre-activation.
        gate = (preacts[l - 1] > 0.0).astype(np.float64)
        deriv[l - 1] = np.einsum("icj,jk->ick", deriv[l], w) * gate[:, None, :]
    return acts, preacts, deriv


def jacobian(net, x):
    """Exact per-sample Jacobian of outputs w.r.t. the flat parameters."""
    x = _check_inputs(net, x)
    acts, _, deriv = _output_preact_jacobians(net, x)
    n = x.shape[0]
    c = net.spec.output_dim
    p = param_count(net.spec)
    blocks = np.empty((n, c, p))
    for l, (w_sl, b_sl, n_in, n_out) in enumerate(layer_slices(net.spec)):
        a_prev = acts[l]
        wj = np.einsum("icj,ik->icjk", deriv[l], a_prev)
        blocks[:, :, w_sl] = wj.reshape(n, c, n_out * n_in)
        blocks[:, :, b_sl] = deriv[l]
    return Jacobian(matrix=blocks.reshape(n * c, p), n=n, C=c)


def vjp(net, x, g):
    """Parameter gradient of sum_i g_i . f(x_i); g has shape (n, C)."""
    x = _check_inputs(net, x)
    g = np.asarray(g, dtype=np.float64)
    layers = unflatten(net.spec, net.theta)
    acts, preacts = _forward_cache(net, x)
    grad = np.zeros(param_count(net.spec))
    delta = g
    slices = layer_slices(net.spec)
    for l in range(len(layers) - 1, -1, -1):
        w_sl, b_sl, n_in, n_out = slices[l]
        grad[w_sl] = (delta.T @ acts[l]).ravel()
        grad[b_sl] = delta.sum(axis=0)
        if l > 0:
            w, _ = layers[l]
            delta = (delta @ w) * (preacts[l - 1] > 0.0)
    return grad


def jacobian_rank(jac, tol=1e-8):
    """Number of singular values above tol * largest, via eig of J J^T."""
    m = jac.matrix
    gram = m @ m.T
    eigvals = np.linalg.eigvalsh(gram)
    svals = np.sqrt(np.clip(eigvals, 0.0, None))
    top = svals.max(initial=0.0)
    if top == 0.0:
        return 0
    return int(np.sum(svals > tol * top))


def save_network(net, path):
    """Write spec + parameters as self-describing JSON (full precision)."""
    payload = {
        "layer_widths": list(net.spec.layer_widths),
        "activation": net.spec.activation,
        "theta": [float(t) for t in net.theta],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_network(path):
    with open(path) as fh:
        payload = json.load(fh)
    spec = NetworkSpec(tuple(payload["layer_widths"]),
                       activation=payload.get("activation", "relu"))
    return Network(spec, np.asarray(payload["theta"], dtype=np.float64))
