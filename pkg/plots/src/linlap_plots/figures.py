"""Figure construction: metric-vs-s line plots and sensitivity heatmaps.

Line style encodes the method family the way the source figures do:
subset methods dashed, low-rank methods solid, the exact-posterior
construction dash-dot, the unreduced model dotted.
"""

from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schema import SchemaError, aggregate_metric, load_runs, load_sensitivity

METRIC_LABELS = {
    "rel_error": "relative error",
    "log_trace": "log trace",
    "nll": "NLL",
    "trace": "trace",
}

# method -> (color, linestyle); families share a line type
BASE_STYLE = {
    "subset-magnitude": ("tab:blue", "--"),
    "subset-diagonal": ("tab:pink", "--"),
    "subset-swag": ("tab:green", "--"),
    "lowrank-diagonal": ("tab:purple", "-"),
    "lowrank-kfac": ("tab:orange", "-"),
    "lowrank-opt-ggn": ("black", "-."),
    "none-full": ("tab:gray", ":"),
}

_FALLBACK_COLORS = ("tab:red", "tab:brown", "tab:olive", "tab:cyan")

PNG_METADATA = {"Software": "linlap-plots"}


@dataclass(frozen=True)
class PlotSpec:
    csv_paths: tuple
    metric: str
    out_path: str
    style: dict = field(default_factory=dict)
    title: str = ""


def method_style(method, extra=None, fallback_index=0):
    if extra and method in extra:
        return extra[method]
    if method in BASE_STYLE:
        return BASE_STYLE[method]
    return (_FALLBACK_COLORS[fallback_index % len(_FALLBACK_COLORS)], "-")


def plot_metric_vs_s(spec: PlotSpec):
    """One line per method over s; shaded band is the seed standard
    error; absent cells leave gaps in the line."""
    rows = load_runs(spec.csv_paths)
    if not rows:
        raise SchemaError("no rows to plot")
    agg = aggregate_metric(rows, spec.metric)
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    unknown = 0
    for method in sorted(agg):
        cells = agg[method]
        s_values = np.array(sorted(cells))
        means = np.array([cells[s][0] for s in s_values])
        errs = np.array([cells[s][1] for s in s_values])
        color, style = method_style(method, spec.style, unknown)
        if method not in BASE_STYLE and method not in spec.style:
            unknown += 1
        ax.plot(s_values, means, linestyle=style, color=color, marker="o",
                markersize=3, label=method)
        band = ~np.isnan(means)
        ax.fill_between(s_values, means - errs, means + errs, where=band,
                        color=color, alpha=0.2, linewidth=0)
    ax.set_xlabel("subspace dimension s")
    ax.set_ylabel(METRIC_LABELS[spec.metric])
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150, metadata=PNG_METADATA)
    plt.close(fig)
    return spec.out_path


def plot_sensitivity_heatmap(csv_path, out_path, max_params=None):
    """Heatmap of per-sample parameter sensitivities with the columns
    sorted by their mean, plus the sorted mean curve below."""
    mat = load_sensitivity(csv_path)
    order = np.argsort(-mat.mean(axis=0), kind="stable")
    if max_params:
        order = order[:max_params]
    sorted_mat = mat[:, order]
    marginal = sorted_mat.mean(axis=0)
    fig, (ax_map, ax_marg) = plt.subplots(
        2, 1, figsize=(5.0, 4.2), sharex=True,
        gridspec_kw={"height_ratios": [3, 1]})
    im = ax_map.imshow(sorted_mat, aspect="auto", interpolation="nearest",
                       cmap="viridis")
    ax_map.set_ylabel("sample")
    fig.colorbar(im, ax=ax_map, label="sensitivity")
    ax_marg.plot(np.arange(len(marginal)), marginal, color="tab:blue")
    ax_marg.set_xlabel("parameter (sorted by mean sensitivity)")
    ax_marg.set_ylabel("mean")
    ax_marg.set_xlim(-0.5, len(marginal) - 0.5)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150, metadata=PNG_METADATA)
    plt.close(fig)
    return out_path
