"""MAP training under MSE/cross-entropy plus L2, and SWAG moment collection.

The optimizer is plain SGD with a trapezoidal learning-rate schedule:
linear warm-up, plateau, linear decay to zero.  Internally each step
descends the per-sample-mean objective (same minimizer as the summed
negative log-posterior, but the learning rate stays O(1) across dataset
sizes).
"""

from dataclasses import dataclass, field

import numpy as np

from . import model
from .data import Classification, Dataset, Regression
from .errors import TrainingDivergedError, UnsupportedTaskError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    lr: float
    warmup_frac: float = 0.1
    decay_frac: float = 0.5
    batch_size: int = 0  # 0 = full batch
    lam: float = 1.0
    sigma: float = 1.0   # regression noise assumed while training
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must be in [0, 1)")
        if not 0.0 <= self.decay_frac <= 1.0:
            raise ValueError("decay_frac must be in [0, 1]")
        if self.warmup_frac > self.decay_frac:
            raise ValueError("warmup_frac must not exceed decay_frac")
        if self.lam <= 0:
            raise ValueError("prior precision lam must be positive")


@dataclass
class TrainResult:
    network: model.Network
    trace: list = field(default_factory=list)  # (epoch, train_loss, test_loss)


@dataclass(frozen=True)
class SwagConfig:
    steps: int = 1000
    snapshot_every: int = 50
    lr: float = 0.01
    batch_size: int = 0
    seed: int = 0


@dataclass(frozen=True)
class SwagStats:
    """First and second moments of the SGD iterates."""

    mean: np.ndarray
    second_moment: np.ndarray
    snapshots: int

    @property
    def variance(self):
        return np.clip(self.second_moment - self.mean ** 2, 0.0, None)


def lr_schedule(base_lr, total_steps, warmup_frac, decay_frac):
    """Per-step learning rates: ramp to base_lr, plateau, decay to 0."""
    warm = int(round(warmup_frac * total_steps))
    decay_start = int(round(decay_frac * total_steps))
    lrs = np.full(total_steps, base_lr)
    if warm > 0:
        lrs[:warm] = base_lr * (np.arange(1, warm + 1) / warm)
    if decay_start < total_steps:
        tail = total_steps - decay_start
        lrs[decay_start:] = base_lr * (np.arange(tail, 0, -1) / tail)
    return lrs


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def nll_sum(net, x, y, task, sigma=1.0):
    """Summed negative log-likelihood of the batch under the model."""
    f = model.forward(net, x)
    if isinstance(task, Regression):
        resid = f - y
        n, c = f.shape
        return float(0.5 * np.sum(resid ** 2) / sigma ** 2
                     + 0.5 * n * c * (LOG_2PI + 2.0 * np.log(sigma)))
    logits = f - f.max(axis=1, keepdims=True)
    logz = np.log(np.exp(logits).sum(axis=1))
    return float(np.sum(logz - logits[np.arange(len(y)), y]))


def loss(net, x, y, task, lam, sigma=1.0):
    """Unnormalized negative log-posterior: summed NLL + (lam/2) |theta|^2."""
    return nll_sum(net, x, y, task, sigma) + 0.5 * lam * float(
        net.theta @ net.theta)


def _mean_grad(net, x, y, task, lam, n_total, sigma=1.0):
    """Gradient of (summed NLL + prior)/n_total estimated from one batch."""
    f = model.forward(net, x)
    if isinstance(task, Regression):
        g = (f - y) / sigma ** 2
    else:
        probs = _softmax(f)
        g = probs.copy()
        g[np.arange(len(y)), y] -= 1.0
    data_grad = model.vjp(net, x, g) / x.shape[0]
    return data_grad + (lam / n_total) * net.theta


def _sgd_steps(theta, spec, ds, lam, sigma, lrs, batch_size, rng,
               on_step=None):
    n = ds.n
    b = batch_size if batch_size and batch_size < n else n
    step = 0
    total = len(lrs)
    while step < total:
        order = rng.permutation(n) if b < n else np.arange(n)
        for start in range(0, n, b):
            if step >= total:
                break
            idx = order[start:start + b]
            net = model.Network(spec, theta)
            grad = _mean_grad(net, ds.X[idx], ds.Y[idx], ds.task, lam, n,
                              sigma)
            theta = theta - lrs[step] * grad
            step += 1
            if on_step is not None:
                on_step(step, theta)
    return theta


def train_map(net, train: Dataset, cfg: TrainConfig, test: Dataset = None):
    """SGD to the MAP estimate; records a per-epoch loss trace.

    The trace rows are (epoch, full-train negative log-posterior, mean test
    NLL or nan).  Raises TrainingDivergedError on a non-finite loss.
    """
    n = train.n
    b = cfg.batch_size if cfg.batch_size and cfg.batch_size < n else n
    steps_per_epoch = (n + b - 1) // b
    total = cfg.epochs * steps_per_epoch
    lrs = lr_schedule(cfg.lr, total, cfg.warmup_frac, cfg.decay_frac)
    rng = np.random.default_rng(cfg.seed)
    theta = net.theta.copy()
    result = TrainResult(network=net)
    epoch_end = {(e + 1) * steps_per_epoch: e for e in range(cfg.epochs)}

    def on_step(step, th):
        e = epoch_end.get(step)
        if e is None:
            return
        current = model.Network(net.spec, th)
        train_loss = loss(current, train.X, train.Y, train.task, cfg.lam,
                          cfg.sigma)
        if not np.isfinite(train_loss):
            raise TrainingDivergedError(
                f"non-finite training loss at epoch {e}")
        test_loss = (nll_sum(current, test.X, test.Y, test.task, cfg.sigma)
                     / test.n if test is not None else float("nan"))
        result.trace.append((e, train_loss, test_loss))

    theta = _sgd_steps(theta, net.spec, train, cfg.lam, cfg.sigma, lrs, b,
                       rng, on_step)
    result.network = model.Network(net.spec, theta)
    return result


def estimate_sigma(net, train: Dataset):
    """Homoscedastic noise estimate: sqrt of train MSE averaged over outputs."""
    if not isinstance(train.task, Regression):
        raise UnsupportedTaskError("sigma estimation needs a regression task")
    resid = model.forward(net, train.X) - train.Y
    return float(np.sqrt(np.mean(resid ** 2)))


def run_swag(net, train: Dataset, cfg: SwagConfig, lam=1.0, sigma=1.0):
    """Constant-LR SGD from the MAP; returns moments over the snapshots.

    The input network is left untouched; iterates run on a copy.
    """
    n_snapshots = cfg.steps // cfg.snapshot_every
    if n_snapshots < 2:
        raise ValueError("SWAG needs at least 2 snapshots "
                         f"(steps={cfg.steps}, every={cfg.snapshot_every})")
    rng = np.random.default_rng(cfg.seed)
    lrs = np.full(cfg.steps, cfg.lr)
    acc = {"sum": np.zeros_like(net.theta),
           "sumsq": np.zeros_like(net.theta), "count": 0}

    def on_step(step, theta):
        if step % cfg.snapshot_every == 0:
            acc["sum"] += theta
            acc["sumsq"] += theta ** 2
            acc["count"] += 1

    _sgd_steps(net.theta.copy(), net.spec, train, lam, sigma, lrs,
               cfg.batch_size, rng, on_step)
    k = acc["count"]
    return SwagStats(mean=acc["sum"] / k, second_moment=acc["sumsq"] / k,
                     snapshots=k)
