import numpy as np
import pytest

from linlap import linalg, metrics, model
from linlap.errors import UndefinedMetricError
from linlap.metrics import MetricsReport, make_report
from linlap.predictive import CategoricalPred, EpistemicCov, GaussianPred


def cov(mat, n=None, c=1):
    mat = np.asarray(mat, dtype=np.float64)
    n = n if n is not None else mat.shape[0]
    return EpistemicCov(sigma=mat, n=n, C=c)


class TestRelativeError:
    def test_exact_match_zero(self):
        a = cov(np.diag([2.0, 1.0]))
        assert metrics.relative_error(a, a) == 0.0

    def test_null_approximation_one(self):
        a = cov(np.diag([2.0, 1.0]))
        z = cov(np.zeros((2, 2)))
        assert np.isclose(metrics.relative_error(a, z), 1.0)

    def test_tail_spectrum_formula(self):
        # truncating the eigendecomposition leaves exactly the tail norm
        rng = np.random.default_rng(0)
        mat = rng.normal(size=(6, 6))
        full = cov(mat @ mat.T)
        eig = linalg.sym_eig(full.sigma)
        s = 2
        trunc = cov((eig.vectors[:, :s] * eig.values[:s])
                    @ eig.vectors[:, :s].T)
        got = metrics.relative_error(full, trunc)
        vals = eig.values
        expected = np.sqrt((vals[s:] ** 2).sum()) / np.sqrt((vals ** 2).sum())
        assert np.isclose(got, expected, rtol=1e-10)

    def test_zero_reference_rejected(self):
        z = cov(np.zeros((2, 2)))
        with pytest.raises(UndefinedMetricError):
            metrics.relative_error(z, z)


class TestTraceCriterion:
    def test_trace_value(self):
        assert metrics.trace_criterion(cov(np.diag([1.0, 2.5]))) == 3.5

    def test_zero_cov(self):
        assert metrics.trace_criterion(cov(np.zeros((3, 3)))) == 0.0


class TestNll:
    def test_standard_normal_at_mean(self):
        pred = GaussianPred(mean=np.zeros(1), total_cov=np.eye(1), n=1, C=1)
        val = metrics.nll(pred, np.zeros(1))
        assert np.isclose(val, 0.5 * np.log(2 * np.pi))

    def test_certain_correct_classification(self):
        probs = np.array([[1.0, 0.0], [0.0, 1.0]])
        pred = CategoricalPred(probs=probs)
        assert metrics.nll(pred, np.array([0, 1])) == 0.0

    def test_joint_gaussian_matches_dense_oracle(self):
        rng = np.random.default_rng(1)
        n, c = 4, 2
        a = rng.normal(size=(n * c, n * c))
        total = a @ a.T + np.eye(n * c)
        mean = rng.normal(size=n * c)
        y = rng.normal(size=n * c)
        pred = GaussianPred(mean=mean, total_cov=total, n=n, C=c)
        resid = y - mean
        dense = 0.5 * (resid @ np.linalg.inv(total) @ resid
                       + np.linalg.slogdet(total)[1]
                       + n * c * np.log(2 * np.pi))
        assert np.isclose(metrics.nll(pred, y), dense / n, rtol=1e-12)

    def test_scalar_scan_minimum_at_mse_minus_noise(self):
        # Eq.-level oracle: for homoscedastic 1-D predictions the NLL
        # over a scalar epistemic variance grid bottoms out at
        # MSE_test - sigma^2.
        rng = np.random.default_rng(2)
        n = 400
        sigma = 0.1
        resid = rng.normal(0.0, 0.25, size=n)
        mse = float(np.mean(resid ** 2))
        grid = np.linspace(0.0, 0.2, 201)
        vals = []
        for s2 in grid:
            pred = GaussianPred(mean=np.zeros(n),
                                total_cov=(s2 + sigma ** 2) * np.eye(n),
                                n=n, C=1)
            vals.append(metrics.nll(pred, resid))
        argmin = grid[int(np.argmin(vals))]
        step = grid[1] - grid[0]
        assert abs(argmin - (mse - sigma ** 2)) <= step

    def test_pointwise_equals_joint_for_diagonal(self):
        rng = np.random.default_rng(3)
        n = 5
        var = rng.uniform(0.5, 2.0, size=n)
        mean = rng.normal(size=n)
        y = rng.normal(size=n)
        pred = GaussianPred(mean=mean, total_cov=np.diag(var), n=n, C=1)
        assert np.isclose(metrics.nll(pred, y),
                          metrics.nll_pointwise(pred, y), rtol=1e-12)


class TestDeadParameters:
    def test_zero_column_counted_dead(self):
        mat = np.ones((4, 3))
        mat[:, 1] = 0.0
        jac = model.Jacobian(matrix=mat, n=4, C=1)
        frac = metrics.dead_parameter_fraction(jac, threshold_rel=1e-6)
        assert np.isclose(frac, 1.0 / 3.0)

    def test_linear_layer_all_sensitive(self):
        rng = np.random.default_rng(4)
        mat = rng.uniform(0.5, 1.5, size=(6, 4))
        jac = model.Jacobian(matrix=mat, n=6, C=1)
        assert metrics.dead_parameter_fraction(jac, 1e-6) == 0.0

    def test_strict_inequality_at_zero_threshold(self):
        rng = np.random.default_rng(5)
        jac = model.Jacobian(matrix=rng.normal(size=(5, 7)), n=5, C=1)
        assert metrics.dead_parameter_fraction(jac, 0.0) == 0.0

    def test_sensitivity_matrix_shape(self):
        rng = np.random.default_rng(6)
        jac = model.Jacobian(matrix=rng.normal(size=(8, 5)), n=4, C=2)
        sens = metrics.sensitivity_matrix(jac)
        assert sens.shape == (4, 5)
        assert np.all(sens >= 0.0)
        mean_sens = metrics.parameter_sensitivity(jac)
        assert np.allclose(sens.mean(axis=0), mean_sens)


def report(dataset, method, s, seed, rel, trace):
    return make_report(dataset, method, s, seed, trace=trace, nll=0.5,
                       rel_error=rel)


class TestOrderingAgreement:
    def test_single_pair_extremes(self):
        rows = [report("d", "optimal", 2, 0, rel=0.1, trace=10.0),
                report("d", "zero", 2, 0, rel=1.0, trace=0.0)]
        assert metrics.ordering_agreement(rows) == 1.0

    def test_duplicated_method_no_pairs(self):
        rows = [report("d", "m", 2, 0, rel=0.5, trace=5.0),
                report("d", "m", 2, 1, rel=0.5, trace=5.0)]
        assert metrics.ordering_agreement(rows) is None

    def test_disagreement_counted(self):
        rows = [report("d", "a", 2, 0, rel=0.1, trace=1.0),
                report("d", "b", 2, 0, rel=0.9, trace=9.0),
                report("d", "a", 3, 0, rel=0.1, trace=9.0),
                report("d", "b", 3, 0, rel=0.9, trace=1.0)]
        assert metrics.ordering_agreement(rows) == 0.5

    def test_ties_excluded(self):
        rows = [report("d", "a", 2, 0, rel=0.3, trace=5.0),
                report("d", "b", 2, 0, rel=0.3, trace=7.0)]
        assert metrics.ordering_agreement(rows) is None

    def test_seed_averaging_within_group(self):
        rows = [report("d", "a", 2, 0, rel=0.2, trace=8.0),
                report("d", "a", 2, 1, rel=0.4, trace=6.0),
                report("d", "b", 2, 0, rel=0.9, trace=2.0),
                report("d", "b", 2, 1, rel=0.7, trace=4.0)]
        assert metrics.ordering_agreement(rows) == 1.0

    def test_rows_without_rel_error_skipped(self):
        rows = [report("d", "a", 2, 0, rel=None, trace=8.0),
                report("d", "b", 2, 0, rel=0.9, trace=2.0)]
        assert metrics.ordering_agreement(rows) is None


class TestReportCsv:
    def test_round_trip(self, tmp_path):
        rows = [
            make_report("ds", "m1", 3, 0, trace=2.5, nll=0.7, rel_error=0.3),
            make_report("ds", "m2", 3, 0, trace=0.0, nll=0.9),
        ]
        path = tmp_path / "reports.csv"
        metrics.write_reports(rows, path)
        back = metrics.read_reports(path)
        assert back == rows
        assert back[1].log_trace is None  # zero trace -> absent

    def test_malformed_rows_skipped_with_count(self, tmp_path):
        path = tmp_path / "reports.csv"
        path.write_text(
            "dataset,method,s,seed,rel_error,trace,log_trace,nll\n"
            "d,m,2,0,0.5,1.0,0.0,0.3\n"
            "d,m,not_an_int,0,0.5,1.0,0.0,0.3\n"
            "d,m,3,0,,2.0,0.693,0.4\n")
        bad = []
        rows = metrics.read_reports(path,
                                    on_bad_row=lambda i, e: bad.append(i))
        assert len(rows) == 2
        assert bad == [3]

    def test_log_trace_is_natural_log(self):
        r = make_report("d", "m", 1, 0, trace=np.e, nll=0.0, rel_error=None)
        assert np.isclose(r.log_trace, 1.0)
