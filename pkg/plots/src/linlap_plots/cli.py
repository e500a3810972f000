"""Command-line entry points for figure rendering."""

import click

from .figures import PlotSpec, plot_metric_vs_s, plot_sensitivity_heatmap


@click.group()
def main():
    """Render metric CSVs into figures."""


@main.command("metric")
@click.option("--csv", "csv_paths", multiple=True, required=True,
              type=click.Path(exists=True), help="per-run metrics CSV")
@click.option("--metric", required=True,
              type=click.Choice(["rel_error", "log_trace", "nll", "trace"]))
@click.option("--out", required=True, type=click.Path())
@click.option("--title", default="")
def cmd_metric(csv_paths, metric, out, title):
    """Line plot of a metric over the subspace dimension."""
    path = plot_metric_vs_s(PlotSpec(csv_paths=tuple(csv_paths),
                                     metric=metric, out_path=out,
                                     title=title))
    click.echo(path)


@main.command("heatmap")
@click.option("--csv", "csv_path", required=True,
              type=click.Path(exists=True), help="sensitivity CSV")
@click.option("--out", required=True, type=click.Path())
@click.option("--max-params", type=int, default=None)
def cmd_heatmap(csv_path, out, max_params):
    """Sensitivity heatmap with sorted parameters and marginal curve."""
    path = plot_sensitivity_heatmap(csv_path, out, max_params=max_params)
    click.echo(path)


if __name__ == "__main__":
    main()
