import numpy as np
import pytest

from linlap import linalg
from linlap.errors import DimensionError, NotPositiveDefiniteError, NumericError


def random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    return 0.5 * (a + a.T)


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


class TestSymEig:
    def test_identity(self):
        eig = linalg.sym_eig(np.eye(3))
        assert np.allclose(eig.values, [1.0, 1.0, 1.0])

    def test_diagonal_values_and_vectors(self):
        eig = linalg.sym_eig(np.diag([5.0, 2.0]))
        assert np.allclose(eig.values, [5.0, 2.0])
        # sign convention makes the canonical vectors come out positive
        assert np.allclose(eig.vectors[:, 0], [1.0, 0.0])
        assert np.allclose(eig.vectors[:, 1], [0.0, 1.0])

    def test_reconstruction_random_6x6(self):
        a = random_symmetric(6, seed=0)
        eig = linalg.sym_eig(a)
        recon = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
        assert linalg.frob_norm(recon - a) < 1e-10 * linalg.frob_norm(a)

    @pytest.mark.parametrize("n", [2, 5, 20, 100, 200])
    def test_reconstruction_and_orthonormality_up_to_200(self, n):
        a = random_symmetric(n, seed=n)
        eig = linalg.sym_eig(a)
        recon = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
        assert linalg.frob_norm(recon - a) <= 1e-8 * linalg.frob_norm(a)
        gram = eig.vectors.T @ eig.vectors
        assert linalg.frob_norm(gram - np.eye(n)) <= 1e-9

    def test_values_descending(self):
        eig = linalg.sym_eig(random_symmetric(12, seed=3))
        assert np.all(np.diff(eig.values) <= 0)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            linalg.sym_eig(np.zeros((2, 3)))

    def test_non_finite_rejected(self):
        a = np.eye(2)
        a[0, 1] = np.nan
        with pytest.raises(NumericError):
            linalg.sym_eig(a)

    def test_asymmetric_rejected(self):
        a = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            linalg.sym_eig(a)

    def test_deterministic_and_sign_convention(self):
        a = random_symmetric(9, seed=7)
        e1 = linalg.sym_eig(a)
        e2 = linalg.sym_eig(a)
        assert np.array_equal(e1.vectors, e2.vectors)
        for j in range(9):
            col = e1.vectors[:, j]
            first = col[np.argmax(np.abs(col) > 1e-12 * np.abs(col).max())]
            assert first > 0


class TestTruncatedEig:
    def test_diagonal_top2(self):
        eig = linalg.truncated_eig(np.diag([3.0, 2.0, 1.0]), 2)
        assert np.allclose(eig.values, [3.0, 2.0])
        assert eig.vectors.shape == (3, 2)

    def test_rank_one(self):
        v = np.array([1.0, 2.0, -2.0])
        eig = linalg.truncated_eig(np.outer(v, v), 1)
        assert np.isclose(eig.values[0], v @ v)
        unit = v / np.linalg.norm(v)
        assert min(np.linalg.norm(eig.vectors[:, 0] - unit),
                   np.linalg.norm(eig.vectors[:, 0] + unit)) < 1e-12

    def test_matches_full_decomposition(self):
        a = random_spd(8, seed=5)
        full = linalg.sym_eig(a)
        trunc = linalg.truncated_eig(a, 3)
        assert np.array_equal(trunc.values, full.values[:3])
        assert np.array_equal(trunc.vectors, full.vectors[:, :3])

    def test_full_s_equals_sym_eig(self):
        a = random_symmetric(10, seed=11)
        assert np.array_equal(linalg.truncated_eig(a, 10).values,
                              linalg.sym_eig(a).values)

    @pytest.mark.parametrize("s", [0, 4])
    def test_s_out_of_range(self, s):
        with pytest.raises(ValueError):
            linalg.truncated_eig(np.eye(3), s)


class TestSolveSpd:
    def test_identity(self):
        b = np.arange(6.0).reshape(3, 2)
        assert np.allclose(linalg.solve_spd(np.eye(3), b), b)

    def test_diagonal(self):
        x = linalg.solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 4.0]))
        assert np.allclose(x, [1.0, 1.0])

    def test_residual_random_spd(self):
        a = random_spd(5, seed=2)
        b = np.random.default_rng(3).normal(size=(5, 4))
        x = linalg.solve_spd(a, b)
        assert linalg.frob_norm(a @ x - b) < 1e-10 * linalg.frob_norm(b)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            linalg.solve_spd(np.diag([1.0, -1.0]), np.ones(2))

    def test_psd_singular_uses_jitter(self):
        v = np.array([1.0, 1.0, 1.0])
        a = np.outer(v, v)  # PSD, rank 1
        x = linalg.solve_spd(a, v)
        assert np.all(np.isfinite(x))

    def test_row_mismatch(self):
        with pytest.raises(DimensionError):
            linalg.solve_spd(np.eye(3), np.ones((2, 1)))


class TestFrobNorm:
    def test_zero(self):
        assert linalg.frob_norm(np.zeros((3, 5))) == 0.0

    def test_identity_4x4(self):
        assert np.isclose(linalg.frob_norm(np.eye(4)), 2.0)

    def test_three_four_five(self):
        assert np.isclose(linalg.frob_norm([[3.0, 4.0], [0.0, 0.0]]), 5.0)
