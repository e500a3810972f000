import numpy as np
import pytest


def format_row(dataset, method, s, seed, rel, trace, log_trace, nll):
    def fmt(v):
        return "" if v is None else format(v, ".17g")
    return ",".join([dataset, method, str(s), str(seed), fmt(rel),
                     fmt(trace), fmt(log_trace), fmt(nll)])


@pytest.fixture
def runs_csv(tmp_path):
    """Schema-identical per-run CSV with two methods, three s values,
    two seeds, and one zero-trace row (absent log_trace)."""
    rng = np.random.default_rng(0)
    lines = ["dataset,method,s,seed,rel_error,trace,log_trace,nll"]
    for method, base in (("subset-magnitude", 0.9), ("lowrank-kfac", 0.4)):
        for s in (1, 2, 5):
            for seed in (0, 1):
                rel = base - 0.05 * s + 0.01 * seed
                trace = 1.0 - rel
                lines.append(format_row("fixture", method, s, seed, rel,
                                        trace, float(np.log(trace)),
                                        0.5 + 0.01 * seed))
    # zero-trace cell: log_trace absent for both seeds at s=1
    for seed in (0, 1):
        lines.append(format_row("fixture", "subset-swag", 1, seed, 1.0,
                                0.0, None, 0.7))
        for s in (2, 5):
            lines.append(format_row("fixture", "subset-swag", s, seed,
                                    0.8 - 0.02 * s, 0.2 + 0.02 * s,
                                    float(np.log(0.2 + 0.02 * s)), 0.6))
    path = tmp_path / "runs_fixture.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def sensitivity_csv(tmp_path):
    rng = np.random.default_rng(1)
    p, n = 40, 12
    scale = np.exp(-np.arange(p) / 6.0)
    mat = np.abs(rng.normal(size=(n, p))) * scale[None, :]
    # shuffle columns so the plot has to sort them
    mat = mat[:, rng.permutation(p)]
    lines = [",".join(f"param_{j}" for j in range(p))]
    lines += [",".join(format(v, ".17g") for v in row) for row in mat]
    path = tmp_path / "sensitivity_fixture.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
