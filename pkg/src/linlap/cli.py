"""Config-driven experiment pipeline and its command-line interface.

One experiment = dataset -> MAP training -> curvature -> posterior
approximations -> projector families swept over subspace dimensions ->
metric rows.  Seeds run independently; checkpoints and curvature
factors are cached per seed inside the output directory so projector
sweeps never retrain.
"""

import logging
import math
import os
from dataclasses import dataclass

import click
import numpy as np
import yaml

from . import curvature, data, metrics, model, posterior, predictive, subspace, train
from .data import Classification, Regression
from .errors import CapacityError, LinlapError, RankError
from .metrics import make_report
from .subspace import ProjectorKind

log = logging.getLogger("linlap")

AGGREGATE_COLUMNS = (
    "dataset", "method", "s", "n_seeds",
    "rel_error_mean", "rel_error_stderr",
    "trace_mean", "trace_stderr",
    "log_trace_mean", "log_trace_stderr",
    "nll_mean", "nll_stderr",
)

DEFAULT_PROJECTORS = [k.value for k in ProjectorKind]


@dataclass(frozen=True)
class DatasetConfig:
    kind: str                  # sincos | blobs | csv
    n: int = 1000
    sigma: float = 0.1
    x_range: tuple = (-10.0, 10.0)
    classes: int = 3
    dim: int = 2
    separation: float = 3.0
    path: str = ""
    target_columns: tuple = ()
    task: str = "regression"
    header: bool = False
    seed: int = 1234           # generation seed, fixed across run seeds


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    output_dir: str
    dataset: DatasetConfig
    hidden: tuple = (128, 128)
    epochs: int = 300
    lr: float = 0.05
    warmup_frac: float = 0.1
    decay_frac: float = 0.5
    batch_size: int = 0
    lam: float = 1.0
    train_fraction: float = 0.8
    construction_subset: int = 0
    eval_subset: int = 0
    swag_steps: int = 1000
    swag_snapshot_every: int = 50
    swag_lr: float | None = None
    swag_batch_size: int = 128
    projectors: tuple = tuple(DEFAULT_PROJECTORS)
    s_grid: tuple = (1, 2, 5, 10, 20, 40)
    seeds: tuple = (0, 1, 2, 3, 4)
    sigma_mode: object = "estimate"   # "estimate" or a float
    emit_sensitivity: bool = True
    sensitivity_rows: int = 200

    def __post_init__(self):
        if list(self.s_grid) != sorted(self.s_grid):
            raise ValueError("s_grid must be sorted ascending")
        if not self.projectors:
            raise ValueError("need at least one projector kind")
        for kind in self.projectors:
            ProjectorKind(kind)  # validates


def _dataset_config(raw):
    raw = dict(raw)
    if "x_range" in raw:
        raw["x_range"] = tuple(raw["x_range"])
    if "target_columns" in raw:
        raw["target_columns"] = tuple(raw["target_columns"])
    return DatasetConfig(**raw)


def config_from_dict(raw):
    raw = dict(raw)
    ds = _dataset_config(raw.pop("dataset"))
    for key in ("hidden", "projectors", "s_grid", "seeds"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return ExperimentConfig(dataset=ds, **raw)


def load_config(path, overrides=()):
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    for item in overrides:
        key, _, value = item.partition("=")
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = yaml.safe_load(value)
    return config_from_dict(raw)


def build_dataset(cfg: DatasetConfig):
    if cfg.kind == "sincos":
        return data.synth_sincos(cfg.n, sigma=cfg.sigma, x_range=cfg.x_range,
                                 seed=cfg.seed)
    if cfg.kind == "blobs":
        return data.synth_blobs(cfg.n, cfg.classes, cfg.dim, cfg.separation,
                                seed=cfg.seed)
    if cfg.kind == "csv":
        task = (Classification(cfg.classes) if cfg.task == "classification"
                else Regression(cfg.sigma))
        return data.load_csv(cfg.path, list(cfg.target_columns), task,
                             header=cfg.header)
    raise ValueError(f"unknown dataset kind {cfg.kind!r}")


@dataclass
class SeedArtifacts:
    seed: int
    split: data.Split
    net: model.Network
    sigma_pred: float
    factor: curvature.CurvatureFactor
    jac_eval: model.Jacobian
    jac_constr: model.Jacobian
    full_post: posterior.FullPosterior | None
    cov_x: predictive.EpistemicCov | None
    swag_variance: np.ndarray | None
    lowrank_bases: dict


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def prepare_seed(cfg: ExperimentConfig, seed: int):
    """Train (or load the cached checkpoint) and build every per-seed
    object the projector sweep needs."""
    raw = build_dataset(cfg.dataset)
    split = data.split_and_subset(raw, data.SplitConfig(
        train_fraction=cfg.train_fraction,
        construction_subset_size=cfg.construction_subset,
        eval_subset_size=cfg.eval_subset, seed=seed))
    train_ds, stats = data.normalize(split.train)
    test_ds = data.apply_normalization(split.test, stats)
    constr_ds = data.apply_normalization(split.construction, stats)
    eval_ds = data.apply_normalization(split.eval, stats)
    split = data.Split(train=train_ds, test=test_ds, construction=constr_ds,
                       eval=eval_ds)

    cache_dir = os.path.join(cfg.output_dir, "cache")
    os.makedirs(cache_dir, exist_ok=True)
    ckpt = os.path.join(cache_dir, f"ckpt_{cfg.name}_seed{seed}.json")
    widths = (train_ds.d, *cfg.hidden, train_ds.n_outputs)
    spec = model.NetworkSpec(widths)
    if os.path.exists(ckpt):
        net = model.load_network(ckpt)
        if net.spec != spec:
            raise LinlapError(
                f"cached checkpoint {ckpt} has architecture "
                f"{net.spec.layer_widths}, expected {widths}; clear the "
                "cache when the config changes")
        log.info("seed %d: loaded checkpoint %s", seed, ckpt)
    else:
        init = model.init_network(spec, seed=seed)
        tcfg = train.TrainConfig(
            epochs=cfg.epochs, lr=cfg.lr, warmup_frac=cfg.warmup_frac,
            decay_frac=cfg.decay_frac, batch_size=cfg.batch_size,
            lam=cfg.lam, seed=seed)
        result = train.train_map(init, train_ds, tcfg, test=test_ds)
        net = result.network
        model.save_network(net, ckpt)
        trace_path = os.path.join(cfg.output_dir,
                                  f"trace_{cfg.name}_seed{seed}.csv")
        lines = ["epoch,train_loss,test_loss"]
        lines += [f"{e},{tl:.17g},{vl:.17g}" for e, tl, vl in result.trace]
        _atomic_write(trace_path, "\n".join(lines) + "\n")
        log.info("seed %d: trained %d epochs, final loss %.4f", seed,
                 cfg.epochs, result.trace[-1][1])

    if isinstance(train_ds.task, Regression):
        if cfg.sigma_mode == "estimate":
            sigma_pred = max(train.estimate_sigma(net, train_ds), 1e-6)
        else:
            sigma_pred = float(cfg.sigma_mode)
    else:
        sigma_pred = 1.0

    factor_path = os.path.join(cache_dir,
                               f"factor_{cfg.name}_seed{seed}.bin")
    if os.path.exists(factor_path):
        factor = curvature.load_factor(factor_path)
    else:
        factor = curvature.curvature_factor(net, train_ds, sigma=sigma_pred)
        curvature.save_factor(factor, factor_path)

    jac_eval = model.jacobian(net, eval_ds.X)
    jac_constr = model.jacobian(net, constr_ds.X)

    full_post = None
    cov_x = None
    if factor.p <= curvature.FULL_GGN_MAX_P:
        full_post = posterior.build_posterior("full", cfg.lam, factor=factor)
        cov_x = predictive.epistemic_cov_full(jac_eval, full_post)
    else:
        log.warning("seed %d: full posterior infeasible at p=%d; "
                    "relative error and the optimal projector are skipped",
                    seed, factor.p)

    swag_variance = None
    if ProjectorKind.SUBSET_SWAG.value in cfg.projectors:
        scfg = train.SwagConfig(
            steps=cfg.swag_steps, snapshot_every=cfg.swag_snapshot_every,
            lr=cfg.swag_lr if cfg.swag_lr is not None else cfg.lr,
            batch_size=cfg.swag_batch_size, seed=seed)
        swag_variance = train.run_swag(net, train_ds, scfg,
                                       lam=cfg.lam).variance

    bases = {}
    if ProjectorKind.LOWRANK_DIAGONAL.value in cfg.projectors:
        diag_post = posterior.build_posterior("diagonal", cfg.lam,
                                              factor=factor)
        bases[ProjectorKind.LOWRANK_DIAGONAL] = subspace.lowrank_basis(
            diag_post, jac_constr)
    if ProjectorKind.LOWRANK_KFAC.value in cfg.projectors:
        kfac = curvature.kfac_factors(net, train_ds, sigma=sigma_pred)
        kfac_post = posterior.build_posterior("kfac", cfg.lam, kfac=kfac)
        bases[ProjectorKind.LOWRANK_KFAC] = subspace.lowrank_basis(
            kfac_post, jac_constr)

    return SeedArtifacts(seed=seed, split=split, net=net,
                         sigma_pred=sigma_pred, factor=factor,
                         jac_eval=jac_eval, jac_constr=jac_constr,
                         full_post=full_post, cov_x=cov_x,
                         swag_variance=swag_variance, lowrank_bases=bases)


def _subset_scores(art: SeedArtifacts, kind: ProjectorKind, lam):
    if kind is ProjectorKind.SUBSET_MAGNITUDE:
        return np.abs(art.net.theta)
    if kind is ProjectorKind.SUBSET_DIAGONAL:
        diag_post = posterior.DiagonalPosterior(
            curvature.ggn_diag(art.factor), lam)
        return diag_post.variance_diag()
    if kind is ProjectorKind.SUBSET_SWAG:
        if art.swag_variance is None:
            raise LinlapError("SWAG statistics were not collected")
        return art.swag_variance
    raise ValueError(f"{kind} is not a subset kind")


def dimension_cap(art: SeedArtifacts, kind: ProjectorKind):
    """Largest structurally admissible s for this projector family."""
    if kind in subspace.SUBSET_KINDS or kind is ProjectorKind.FULL:
        return art.factor.p
    if kind is ProjectorKind.LOWRANK_OPT_GGN:
        return min(art.jac_eval.matrix.shape[0], art.factor.p)
    return min(art.jac_constr.matrix.shape[0], art.factor.p)


def build_projector(cfg, art: SeedArtifacts, kind: ProjectorKind, s):
    if kind in subspace.SUBSET_KINDS:
        return subspace.subset_projector(_subset_scores(art, kind, cfg.lam),
                                         s, kind)
    if kind in (ProjectorKind.LOWRANK_DIAGONAL, ProjectorKind.LOWRANK_KFAC):
        return art.lowrank_bases[kind].projector(s, kind)
    if kind is ProjectorKind.LOWRANK_OPT_GGN:
        if art.full_post is None:
            raise CapacityError("optimal projector needs the full posterior")
        return subspace.optimal_projector(art.factor, cfg.lam, art.jac_eval,
                                          s, post=art.full_post)
    if kind is ProjectorKind.FULL:
        return subspace.full_projector(art.factor.p)
    raise ValueError(f"unknown projector kind {kind}")


def evaluate_cell(cfg, art: SeedArtifacts, kind: ProjectorKind, s):
    """One (seed, method, s) cell: construct, project, measure."""
    proj = build_projector(cfg, art, kind, s)
    cov_p = predictive.epistemic_cov_subspace(art.jac_eval, proj,
                                              art.factor, cfg.lam)
    rel = (metrics.relative_error(art.cov_x, cov_p)
           if art.cov_x is not None else None)
    eval_ds = art.split.eval
    if isinstance(eval_ds.task, Regression):
        pred = predictive.predict_regression(art.net, eval_ds.X, cov_p,
                                             art.sigma_pred)
    else:
        pred = predictive.predict_classification_probit(art.net, eval_ds.X,
                                                        cov_p)
    nll_val = metrics.nll(pred, eval_ds.Y)
    return make_report(cfg.name, kind.value, proj.s, art.seed,
                       trace=metrics.trace_criterion(cov_p), nll=nll_val,
                       rel_error=rel)


@dataclass
class ExperimentResult:
    reports: list
    failures: list  # (seed, method, s, message)
    skipped: list   # rank-skips, logged but not failures
    per_run_csv: str
    aggregate_csv: str


def run_experiment(cfg: ExperimentConfig):
    """Full sweep: every seed, projector kind, and subspace dimension."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    reports = []
    failures = []
    skipped = []
    for seed in cfg.seeds:
        try:
            art = prepare_seed(cfg, seed)
        except LinlapError as exc:
            log.error("seed %d: preparation failed: %s", seed, exc)
            failures.append((seed, "<prepare>", -1, str(exc)))
            continue
        for kind_name in cfg.projectors:
            kind = ProjectorKind(kind_name)
            s_values = [None] if kind is ProjectorKind.FULL else cfg.s_grid
            for s in s_values:
                if s is not None and s > dimension_cap(art, kind):
                    log.info("seed %d %s s=%s skipped: exceeds dimension "
                             "cap %d", seed, kind.value, s,
                             dimension_cap(art, kind))
                    skipped.append((seed, kind.value, s, "dimension cap"))
                    continue
                try:
                    reports.append(evaluate_cell(cfg, art, kind, s))
                except RankError as exc:
                    log.info("seed %d %s s=%s skipped: %s", seed,
                             kind.value, s, exc)
                    skipped.append((seed, kind.value, s, str(exc)))
                except LinlapError as exc:
                    log.error("seed %d %s s=%s failed: %s", seed,
                              kind.value, s, exc)
                    failures.append((seed, kind.value, s, str(exc)))
        if cfg.emit_sensitivity and seed == cfg.seeds[0]:
            _write_sensitivity(cfg, art)
    per_run = os.path.join(cfg.output_dir, f"runs_{cfg.name}.csv")
    metrics.write_reports(reports, per_run)
    aggregate = os.path.join(cfg.output_dir, f"aggregate_{cfg.name}.csv")
    write_aggregate(reports, aggregate)
    log.info("experiment %s: %d rows, %d skipped, %d failures", cfg.name,
             len(reports), len(skipped), len(failures))
    return ExperimentResult(reports=reports, failures=failures,
                            skipped=skipped, per_run_csv=per_run,
                            aggregate_csv=aggregate)


def _write_sensitivity(cfg, art: SeedArtifacts):
    sens = metrics.sensitivity_matrix(art.jac_constr)
    rows = min(cfg.sensitivity_rows, sens.shape[0])
    path = os.path.join(cfg.output_dir,
                        f"sensitivity_{cfg.name}_seed{art.seed}.csv")
    header = ",".join(f"param_{j}" for j in range(sens.shape[1]))
    lines = [header]
    lines += [",".join(format(v, ".17g") for v in sens[i])
              for i in range(rows)]
    _atomic_write(path, "\n".join(lines) + "\n")
    frac = metrics.dead_parameter_fraction(art.jac_constr)
    log.info("seed %d: dead parameter fraction %.3f", art.seed, frac)


def _mean_stderr(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, 0.0
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return mean, stderr


def write_aggregate(reports, path):
    """Mean and sample standard error across seeds per (dataset, method, s).

    log_trace aggregates only when every seed produced a positive trace;
    otherwise the cell stays absent (a gap in the plots).
    """
    groups = {}
    for r in reports:
        groups.setdefault((r.dataset, r.method, r.s), []).append(r)

    def fmt(v):
        return "" if v is None else format(v, ".17g")

    lines = [",".join(AGGREGATE_COLUMNS)]
    for (dataset, method, s), rows in sorted(groups.items()):
        rel_m, rel_se = _mean_stderr([r.rel_error for r in rows])
        tr_m, tr_se = _mean_stderr([r.trace for r in rows])
        if all(r.log_trace is not None for r in rows):
            lt_m, lt_se = _mean_stderr([r.log_trace for r in rows])
        else:
            lt_m, lt_se = None, None
        nll_m, nll_se = _mean_stderr([r.nll for r in rows])
        lines.append(",".join([
            dataset, method, str(s), str(len(rows)),
            fmt(rel_m), fmt(rel_se), fmt(tr_m), fmt(tr_se),
            fmt(lt_m), fmt(lt_se), fmt(nll_m), fmt(nll_se)]))
    _atomic_write(path, "\n".join(lines) + "\n")


def compare_report(result_dir):
    """Per (dataset, s) method ranking plus the ordering agreement score."""
    import glob
    paths = sorted(glob.glob(os.path.join(result_dir, "runs_*.csv")))
    if not paths:
        raise LinlapError(f"no runs_*.csv found in {result_dir}")
    warnings = [0]

    def bad_row(i, exc):
        warnings[0] += 1

    reports = []
    for p in paths:
        reports.extend(metrics.read_reports(p, on_bad_row=bad_row))
    groups = {}
    for r in reports:
        groups.setdefault((r.dataset, r.s), {}).setdefault(
            r.method, []).append(r)
    lines = []
    for (dataset, s), methods in sorted(groups.items()):
        stats = {}
        for m, rs in methods.items():
            rels = [r.rel_error for r in rs if r.rel_error is not None]
            stats[m] = (float(np.mean(rels)) if rels else None,
                        float(np.mean([r.trace for r in rs])))
        by_rel = sorted((m for m in stats if stats[m][0] is not None),
                        key=lambda m: stats[m][0])
        by_trace = sorted(stats, key=lambda m: -stats[m][1])
        lines.append(f"{dataset} s={s}")
        if by_rel:
            ranked = ", ".join(f"{m}={stats[m][0]:.4g}" for m in by_rel)
            lines.append(f"  by rel_error: {ranked}")
        ranked_tr = ", ".join(f"{m}={stats[m][1]:.4g}" for m in by_trace)
        lines.append(f"  by trace:     {ranked_tr}")
    agreement = metrics.ordering_agreement(reports)
    lines.append(f"ordering agreement (trace vs rel_error): "
                 f"{'n/a' if agreement is None else format(agreement, '.4f')}")
    if warnings[0]:
        lines.append(f"skipped {warnings[0]} malformed rows")
    return "\n".join(lines), agreement, warnings[0]


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose):
    """Subspace Laplace experiment pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")


def _config_options(fn):
    fn = click.option("--set", "-s", "overrides", multiple=True,
                      help="override config keys, e.g. -s dataset.n=500")(fn)
    fn = click.option("--config", "-c", required=True,
                      type=click.Path(exists=True))(fn)
    return fn


@main.command("run")
@_config_options
def cmd_run(config, overrides):
    """Train, build curvature, sweep projectors, emit metric CSVs."""
    cfg = load_config(config, overrides)
    result = run_experiment(cfg)
    click.echo(f"per-run CSV:   {result.per_run_csv}")
    click.echo(f"aggregate CSV: {result.aggregate_csv}")
    if result.failures:
        click.echo(f"{len(result.failures)} cells failed", err=True)
        raise SystemExit(1)


@main.command("train")
@_config_options
@click.option("--seed", type=int, default=None, help="single seed override")
def cmd_train(config, overrides, seed):
    """Train MAP networks and cache checkpoints."""
    cfg = load_config(config, overrides)
    seeds = [seed] if seed is not None else cfg.seeds
    for sd in seeds:
        art = prepare_seed(cfg, sd)
        click.echo(f"seed {sd}: p={art.factor.p} sigma={art.sigma_pred:.4g}")


@main.command("curvature")
@_config_options
@click.option("--seed", type=int, required=True)
def cmd_curvature(config, overrides, seed):
    """Build and cache the curvature factor for one seed."""
    cfg = load_config(config, overrides)
    art = prepare_seed(cfg, seed)
    path = os.path.join(cfg.output_dir, "cache",
                        f"factor_{cfg.name}_seed{seed}.bin")
    click.echo(f"factor: {path} (p={art.factor.p}, N={art.factor.N}, "
               f"C={art.factor.C})")


@main.command("project")
@_config_options
@click.option("--seed", type=int, required=True)
@click.option("--method", required=True,
              type=click.Choice([k.value for k in ProjectorKind]))
@click.option("--s", "s_dim", type=int, required=True)
@click.option("--out", "-o", required=True, type=click.Path())
def cmd_project(config, overrides, seed, method, s_dim, out):
    """Construct one projector and save it in the binary format."""
    cfg = load_config(config, overrides)
    art = prepare_seed(cfg, seed)
    proj = build_projector(cfg, art, ProjectorKind(method), s_dim)
    subspace.save_projector(proj, out)
    click.echo(f"saved {method} projector (s={proj.s}) to {out}")


@main.command("evaluate")
@_config_options
@click.option("--seed", type=int, required=True)
def cmd_evaluate(config, overrides, seed):
    """Metric rows for a single seed (writes runs_<name>_seed<k>.csv)."""
    cfg = load_config(config, overrides)
    art = prepare_seed(cfg, seed)
    reports = []
    for kind_name in cfg.projectors:
        kind = ProjectorKind(kind_name)
        s_values = [None] if kind is ProjectorKind.FULL else cfg.s_grid
        for s in s_values:
            if s is not None and s > dimension_cap(art, kind):
                log.info("%s s=%s skipped: exceeds dimension cap",
                         kind.value, s)
                continue
            try:
                reports.append(evaluate_cell(cfg, art, kind, s))
            except LinlapError as exc:
                log.warning("%s s=%s: %s", kind.value, s, exc)
    path = os.path.join(cfg.output_dir, f"runs_{cfg.name}_seed{seed}.csv")
    metrics.write_reports(reports, path)
    click.echo(path)


@main.command("report")
@click.argument("result_dir", type=click.Path(exists=True))
def cmd_report(result_dir):
    """Summarize result CSVs: rankings and ordering agreement."""
    text, agreement, warnings = compare_report(result_dir)
    click.echo(text)


if __name__ == "__main__":
    main()
