import numpy as np
import pytest

from linlap import data
from linlap.data import Classification, Dataset, Regression, SplitConfig
from linlap.errors import ParseError


class TestLoadCsv:
    def test_smoke_three_rows(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text("1.0,2.0,3.0\n4.0,5.0,6.0\n7.0,8.0,9.0\n")
        ds = data.load_csv(path, target_columns=[2], task=Regression())
        assert (ds.n, ds.d) == (3, 2)
        assert ds.Y.shape == (3, 1)
        assert np.allclose(ds.Y.ravel(), [3.0, 6.0, 9.0])

    def test_nan_cell_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\nNaN,4.0\n")
        with pytest.raises(ParseError, match="row 2, column 1"):
            data.load_csv(path, target_columns=[1], task=Regression())

    def test_non_numeric_cell_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n3.0,abc\n")
        with pytest.raises(ParseError, match="row 2, column 2"):
            data.load_csv(path, target_columns=[1], task=Regression())

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(ParseError, match="row 2"):
            data.load_csv(path, target_columns=[1], task=Regression())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            data.load_csv(tmp_path / "nope.csv", [0], Regression())

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = Dataset(rng.normal(size=(11, 3)), rng.normal(size=(11, 2)),
                     Regression())
        path = tmp_path / "rt.csv"
        data.save_csv(ds, path, header=True)
        back = data.load_csv(path, target_columns=[3, 4], task=Regression(),
                             header=True)
        assert np.max(np.abs(back.X - ds.X)) < 1e-12
        assert np.max(np.abs(back.Y - ds.Y)) < 1e-12

    def test_classification_labels(self, tmp_path):
        path = tmp_path / "cls.csv"
        path.write_text("0.1,0.2,0\n0.3,0.4,2\n0.5,0.6,1\n")
        ds = data.load_csv(path, [2], Classification(3))
        assert ds.Y.dtype == np.int64
        assert list(ds.Y) == [0, 2, 1]


class TestSynthSincos:
    def test_noiseless_at_origin(self):
        ds = data.synth_sincos(5, sigma=0.0, x_range=(0.0, 0.0), seed=0)
        assert np.allclose(ds.Y, 0.0)

    def test_hand_value_at_two_pi(self):
        two_pi = 2.0 * np.pi
        ds = data.synth_sincos(3, sigma=0.0, x_range=(two_pi, two_pi), seed=1)
        # sin(pi/2) * cos(pi) = -1
        assert np.allclose(ds.Y, -1.0)

    def test_noise_mean_within_monte_carlo_band(self):
        n, sigma = 100_000, 0.1
        ds = data.synth_sincos(n, sigma=sigma, seed=2)
        noise = ds.Y - data.sincos_target(ds.X)
        assert abs(noise.mean()) < 4 * sigma / np.sqrt(n)

    def test_inputs_within_range(self):
        ds = data.synth_sincos(500, sigma=0.1, x_range=(-3.0, 7.0), seed=3)
        assert ds.X.min() >= -3.0 and ds.X.max() <= 7.0


class TestSynthBlobs:
    def test_label_histogram_balanced(self):
        ds = data.synth_blobs(101, n_classes=3, dim=4, separation=2.0, seed=0)
        counts = data.class_counts(ds)
        assert counts.max() - counts.min() <= 1

    def nearest_centroid_accuracy(self, train, test):
        means = np.stack([train.X[train.Y == c].mean(axis=0)
                          for c in range(train.task.n_classes)])
        d2 = ((test.X[:, None, :] - means[None]) ** 2).sum(axis=2)
        return float(np.mean(d2.argmin(axis=1) == test.Y))

    def test_zero_separation_indistinguishable(self):
        train = data.synth_blobs(600, 2, 3, separation=0.0, seed=1)
        test = data.synth_blobs(600, 2, 3, separation=0.0, seed=2)
        acc = self.nearest_centroid_accuracy(train, test)
        assert acc < 0.6

    def test_large_separation_linearly_separable(self):
        train = data.synth_blobs(400, 3, 2, separation=10.0, seed=3)
        test = data.synth_blobs(400, 3, 2, separation=10.0, seed=4)
        assert self.nearest_centroid_accuracy(train, test) > 0.99

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            data.synth_blobs(10, 1, 2, 1.0)


class TestNormalize:
    def test_constant_feature_zeroed(self):
        x = np.ones((10, 2))
        x[:, 1] = np.arange(10.0)
        ds = Dataset(x, np.zeros((10, 1)), Regression())
        normed, _ = data.normalize(ds)
        assert np.allclose(normed.X[:, 0], 0.0)

    def test_idempotent_on_standardized(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(200, 3))
        x = (x - x.mean(axis=0)) / x.std(axis=0)
        y = rng.normal(size=(200, 1))
        y = (y - y.mean(axis=0)) / y.std(axis=0)
        normed, _ = data.normalize(Dataset(x, y, Regression()))
        assert np.max(np.abs(normed.X - x)) < 1e-12
        assert np.max(np.abs(normed.Y - y)) < 1e-12

    def test_recomputed_stats(self):
        rng = np.random.default_rng(1)
        ds = Dataset(rng.normal(2.0, 5.0, size=(300, 4)),
                     rng.normal(size=(300, 2)), Regression())
        normed, stats = data.normalize(ds)
        assert np.max(np.abs(normed.X.mean(axis=0))) < 1e-10
        assert np.max(np.abs(normed.X.std(axis=0) - 1.0)) < 1e-10
        assert np.max(np.abs(normed.Y.mean(axis=0))) < 1e-10

    def test_stats_apply_to_test_data(self):
        rng = np.random.default_rng(2)
        tr = Dataset(rng.normal(3.0, 2.0, size=(100, 2)),
                     rng.normal(size=(100, 1)), Regression())
        te = Dataset(rng.normal(3.0, 2.0, size=(50, 2)),
                     rng.normal(size=(50, 1)), Regression())
        _, stats = data.normalize(tr)
        te_n = data.apply_normalization(te, stats)
        assert np.allclose(te_n.X, (te.X - stats.x_mean) / stats.x_std)

    def test_classification_targets_untouched(self):
        ds = data.synth_blobs(60, 2, 2, 3.0, seed=5)
        normed, stats = data.normalize(ds)
        assert np.array_equal(normed.Y, ds.Y)
        assert stats.y_mean is None


class TestSplit:
    def test_same_seed_identical(self):
        ds = data.synth_sincos(100, seed=0)
        cfg = SplitConfig(train_fraction=0.8, seed=7)
        s1 = data.split_and_subset(ds, cfg)
        s2 = data.split_and_subset(ds, cfg)
        assert np.array_equal(s1.train.X, s2.train.X)
        assert np.array_equal(s1.eval.X, s2.eval.X)

    def test_split_arithmetic(self):
        ds = data.synth_sincos(100, seed=0)
        split = data.split_and_subset(ds, SplitConfig(0.8, seed=1))
        assert split.train.n == 80
        assert split.test.n == 20

    def test_containment_and_disjointness(self):
        ds = data.synth_sincos(100, seed=0)
        split = data.split_and_subset(
            ds, SplitConfig(0.8, construction_subset_size=30,
                            eval_subset_size=10, seed=2))
        train_set = {float(v) for v in split.train.X.ravel()}
        test_set = {float(v) for v in split.test.X.ravel()}
        assert not train_set & test_set
        assert {float(v) for v in split.construction.X.ravel()} <= train_set
        assert {float(v) for v in split.eval.X.ravel()} <= test_set

    def test_oversized_subset_rejected(self):
        ds = data.synth_sincos(50, seed=0)
        with pytest.raises(ValueError):
            data.split_and_subset(
                ds, SplitConfig(0.8, construction_subset_size=41, seed=0))
        with pytest.raises(ValueError):
            data.split_and_subset(
                ds, SplitConfig(0.8, eval_subset_size=11, seed=0))

    def test_default_construction_sizes(self):
        assert data.default_construction_size(Regression(), 400) == 400
        assert data.default_construction_size(Regression(), 5000) == 1000
        assert data.default_construction_size(Classification(3), 2000) == 333
