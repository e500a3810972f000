"""Dataset ingestion, synthetic generators, normalization, and splits.

The split step also fixes the two input sets the rest of the pipeline
keeps referring to: the construction subset (drawn from training inputs,
used to build low-rank projectors) and the evaluation subset (drawn from
test inputs, where predictive covariances and metrics are computed).
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UnsupportedTaskError


@dataclass(frozen=True)
class Regression:
    sigma: float = 0.1


@dataclass(frozen=True)
class Classification:
    n_classes: int


@dataclass(frozen=True)
class Dataset:
    """Inputs X (n, d) plus targets: (n, C) reals or (n,) class indices."""

    X: np.ndarray
    Y: np.ndarray
    task: object

    def __post_init__(self):
        x = np.asarray(self.X, dtype=np.float64)
        object.__setattr__(self, "X", x)
        if isinstance(self.task, Regression):
            y = np.asarray(self.Y, dtype=np.float64)
            if y.ndim == 1:
                y = y[:, None]
        elif isinstance(self.task, Classification):
            y = np.asarray(self.Y)
            if y.size and (y.min() < 0 or y.max() >= self.task.n_classes):
                raise ValueError("class indices out of range")
            y = y.astype(np.int64)
        else:
            raise ValueError(f"unknown task {self.task!r}")
        object.__setattr__(self, "Y", y)
        if x.shape[0] != y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if not np.all(np.isfinite(x)):
            raise ValueError("X contains non-finite entries")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n_outputs(self):
        if isinstance(self.task, Regression):
            return self.Y.shape[1]
        return self.task.n_classes

    def take(self, indices):
        return Dataset(self.X[indices], self.Y[indices], self.task)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float
    construction_subset_size: int = 0  # 0 = default rule
    eval_subset_size: int = 0          # 0 = same as construction size
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset
    construction: Dataset  # subset of train
    eval: Dataset          # subset of test


@dataclass(frozen=True)
class NormStats:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray | None
    y_std: np.ndarray | None


STD_FLOOR = 1e-12


def load_csv(path, target_columns, task, header=False):
    """Parse a numeric CSV into a Dataset; errors carry row/column."""
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    rows = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    start = 1 if header else 0
    width = None
    for r, line in enumerate(lines[start:], start=start + 1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(
                f"row {r}: expected {width} cells, found {len(cells)}")
        vals = []
        for c, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"row {r}, column {c}: non-numeric cell "
                                 f"{cell.strip()!r}") from None
            if not math.isfinite(v):
                raise ParseError(
                    f"row {r}, column {c}: non-finite cell {cell.strip()!r}")
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    targets = sorted(target_columns)
    if any(t < 0 or t >= arr.shape[1] for t in targets):
        raise ValueError(f"target columns {targets} out of range")
    feats = [j for j in range(arr.shape[1]) if j not in targets]
    x = arr[:, feats]
    y = arr[:, targets]
    if isinstance(task, Classification):
        labels = y[:, 0]
        if not np.allclose(labels, np.round(labels)):
            raise ParseError("classification targets must be integer labels")
        y = labels.astype(np.int64)
    return Dataset(x, y, task)


def save_csv(ds, path, header=False):
    """Write features then target columns, full-precision decimal floats."""
    tmp = f"{path}.tmp"
    y = ds.Y if ds.Y.ndim == 2 else ds.Y[:, None]
    with open(tmp, "w") as fh:
        if header:
            names = [f"x{j}" for j in range(ds.d)]
            names += [f"y{j}" for j in range(y.shape[1])]
            fh.write(",".join(names) + "\n")
        for i in range(ds.n):
            cells = [format(v, ".17g") for v in ds.X[i]]
            cells += [format(float(v), ".17g") for v in y[i]]
            fh.write(",".join(cells) + "\n")
    os.replace(tmp, path)


def sincos_target(x):
    """Noise-free regression function sin(x/4) * cos(x/2)."""
    return np.sin(x / 4.0) * np.cos(x / 2.0)


def synth_sincos(n, sigma=0.1, x_range=(-10.0, 10.0), seed=0):
    """1-D regression draws: x uniform on x_range, y = g(x) + N(0, sigma^2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.default_rng(seed)
    lo, hi = x_range
    x = rng.uniform(lo, hi, size=(n, 1))
    y = sincos_target(x) + rng.normal(0.0, sigma, size=(n, 1))
    return Dataset(x, y, Regression(sigma=sigma))


def _simplex_directions(c, d):
    """c unit vectors in R^d with pairwise-equal angles (regular simplex)."""
    if c > d + 1:
        raise ValueError(f"cannot place {c} simplex vertices in {d} dims")
    verts = np.eye(c) - 1.0 / c
    # Rank c-1: rotate into the first c-1 coordinates, then embed in R^d.
    u, s, _ = np.linalg.svd(verts, full_matrices=False)
    coords = u[:, : c - 1] * s[: c - 1]
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    out = np.zeros((c, d))
    out[:, : c - 1] = coords
    return out


def synth_blobs(n, n_classes, dim, separation, seed=0):
    """Unit-variance Gaussian clusters with means on a scaled simplex."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    means = separation * _simplex_directions(n_classes, dim)
    counts = [n // n_classes + (1 if c < n % n_classes else 0)
              for c in range(n_classes)]
    xs, ys = [], []
    for c, cnt in enumerate(counts):
        xs.append(means[c] + rng.normal(size=(cnt, dim)))
        ys.append(np.full(cnt, c, dtype=np.int64))
    x = np.vstack(xs)
    y = np.concatenate(ys)
    perm = rng.permutation(n)
    return Dataset(x[perm], y[perm], Classification(n_classes))


def normalize(ds):
    """Standardize features (and regression targets) to mean 0, std 1.

    Returns the normalized dataset plus the statistics so the same
    transform can be applied to held-out data.
    """
    if ds.n < 2:
        raise ValueError("need at least 2 rows to normalize")
    x_mean = ds.X.mean(axis=0)
    x_std = np.maximum(ds.X.std(axis=0), STD_FLOOR)
    x = (ds.X - x_mean) / x_std
    if isinstance(ds.task, Regression):
        y_mean = ds.Y.mean(axis=0)
        y_std = np.maximum(ds.Y.std(axis=0), STD_FLOOR)
        y = (ds.Y - y_mean) / y_std
        stats = NormStats(x_mean, x_std, y_mean, y_std)
    else:
        y = ds.Y
        stats = NormStats(x_mean, x_std, None, None)
    return Dataset(x, y, ds.task), stats


def apply_normalization(ds, stats):
    x = (ds.X - stats.x_mean) / stats.x_std
    if isinstance(ds.task, Regression) and stats.y_mean is not None:
        y = (ds.Y - stats.y_mean) / stats.y_std
    else:
        y = ds.Y
    return Dataset(x, y, ds.task)


def default_construction_size(task, n_train):
    """min(1000, |train|) for regression; n' C <= 1000 for classification."""
    if isinstance(task, Classification):
        return max(1, min(n_train, 1000 // task.n_classes))
    return min(1000, n_train)


def split_and_subset(ds, cfg):
    """Shuffle, split train/test, and draw the two working subsets.

    Deterministic given cfg.seed; the construction subset comes from the
    training inputs, the evaluation subset from the test inputs.
    """
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(ds.n)
    n_train = int(ds.n * cfg.train_fraction)
    if n_train < 1 or n_train >= ds.n:
        raise ValueError("split leaves an empty train or test set")
    train = ds.take(perm[:n_train])
    test = ds.take(perm[n_train:])
    n_constr = cfg.construction_subset_size or default_construction_size(
        ds.task, train.n)
    if n_constr > train.n:
        raise ValueError(
            f"construction subset {n_constr} exceeds train size {train.n}")
    n_eval = cfg.eval_subset_size or min(n_constr, test.n)
    if n_eval > test.n:
        raise ValueError(
            f"eval subset {n_eval} exceeds test size {test.n}")
    constr_idx = rng.choice(train.n, size=n_constr, replace=False)
    eval_idx = rng.choice(test.n, size=n_eval, replace=False)
    return Split(train=train, test=test,
                 construction=train.take(np.sort(constr_idx)),
                 eval=test.take(np.sort(eval_idx)))


def class_counts(ds):
    if not isinstance(ds.task, Classification):
        raise UnsupportedTaskError("class_counts needs a classification task")
    return np.bincount(ds.Y, minlength=ds.task.n_classes)
