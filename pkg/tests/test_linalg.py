import numpy as np
import numpy.testing as npt
import pytest

from gmsmooth import linalg


class TestQrUpper:
    def test_identity(self):
        q, u = linalg.qr_upper(np.eye(3))
        npt.assert_allclose(q, np.eye(3))
        npt.assert_allclose(u, np.eye(3))

    def test_single_column(self):
        a = np.array([[1.0], [1.0]])
        q, u = linalg.qr_upper(a)
        npt.assert_allclose(u, [[np.sqrt(2.0)]])
        npt.assert_allclose(q, a / np.sqrt(2.0))
        npt.assert_allclose(u.T @ u, a.T @ a, atol=1e-12)

    def test_permutation(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        q, u = linalg.qr_upper(a)
        npt.assert_allclose(u, np.eye(2), atol=1e-14)
        npt.assert_allclose(q @ u, a, atol=1e-14)
        npt.assert_allclose(q.T @ q, np.eye(2), atol=1e-14)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((5, 3))
        q1, u1 = linalg.qr_upper(a)
        q2, u2 = linalg.qr_upper(a.copy())
        assert np.array_equal(q1, q2)
        assert np.array_equal(u1, u2)

    @pytest.mark.parametrize("seed", range(10))
    def test_gram_identity_random(self, seed):
        rng = np.random.default_rng(seed)
        m, n = rng.integers(1, 9, size=2)
        a = rng.standard_normal((m, n))
        _, u = linalg.qr_upper(a)
        scale = max(1.0, np.abs(a.T @ a).max())
        npt.assert_allclose(u.T @ u, a.T @ a, atol=1e-10 * scale)
        assert np.all(np.diag(u)[: min(m, n)] >= 0.0)

    def test_complete_mode(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((5, 2))
        q, u = linalg.qr_upper(a, complete=True)
        assert q.shape == (5, 5)
        npt.assert_allclose(q @ u, a, atol=1e-12)
        npt.assert_allclose(q.T @ q, np.eye(5), atol=1e-12)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            linalg.qr_upper(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestCholLower:
    def test_identity(self):
        npt.assert_allclose(linalg.chol_lower(np.eye(2)), np.eye(2))

    def test_hand_example(self):
        s = np.array([[4.0, 2.0], [2.0, 2.0]])
        l = linalg.chol_lower(s)
        npt.assert_allclose(l, [[2.0, 0.0], [1.0, 1.0]])
        npt.assert_allclose(l @ l.T, s, atol=1e-12)

    def test_scalar(self):
        npt.assert_allclose(linalg.chol_lower([[9.0]]), [[3.0]])

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction_random(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        a = rng.standard_normal((n, n))
        s = a @ a.T + n * np.eye(n)
        l = linalg.chol_lower(s)
        npt.assert_allclose(l @ l.T, s, atol=1e-12 * np.abs(s).max())
        assert np.all(np.diag(l) > 0.0)

    def test_not_pd(self):
        with pytest.raises(linalg.FactorizationError, match="pivot"):
            linalg.chol_lower(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestSolveTriangular:
    def test_identity(self):
        b = np.array([1.0, -2.0])
        npt.assert_allclose(linalg.solve_triangular(np.eye(2), b), b)

    def test_hand_example(self):
        l = np.array([[2.0, 0.0], [1.0, 1.0]])
        x = linalg.solve_triangular(l, np.array([2.0, 2.0]))
        npt.assert_allclose(x, [1.0, 1.0])
        npt.assert_allclose(l @ x, [2.0, 2.0], atol=1e-10)

    def test_scalar(self):
        npt.assert_allclose(linalg.solve_triangular([[3.0]], [6.0]), [2.0])

    def test_transpose(self):
        l = np.array([[2.0, 0.0], [1.0, 1.0]])
        b = np.array([3.0, 1.0])
        x = linalg.solve_triangular(l, b, trans=True)
        npt.assert_allclose(l.T @ x, b, atol=1e-12)

    def test_zero_diagonal(self):
        with pytest.raises(linalg.FactorizationError, match="index 1"):
            linalg.solve_triangular(np.array([[1.0, 0.0], [1.0, 0.0]]), [1.0, 1.0])


class TestPseudoInverse:
    def test_identity(self):
        pinv, rank = linalg.pseudo_inverse(np.eye(2))
        npt.assert_allclose(pinv, np.eye(2))
        assert rank == 2

    def test_diagonal(self):
        pinv, rank = linalg.pseudo_inverse(np.diag([2.0, 0.0]))
        npt.assert_allclose(pinv, np.diag([0.5, 0.0]))
        assert rank == 1

    def test_column(self):
        pinv, rank = linalg.pseudo_inverse(np.array([[1.0], [1.0]]))
        npt.assert_allclose(pinv, [[0.5, 0.5]])
        assert rank == 1

    def test_zero_matrix(self):
        pinv, rank = linalg.pseudo_inverse(np.zeros((2, 3)))
        npt.assert_allclose(pinv, np.zeros((3, 2)))
        assert rank == 0

    @pytest.mark.parametrize("seed", range(10))
    def test_penrose_conditions(self, seed):
        rng = np.random.default_rng(seed)
        m, n = rng.integers(1, 6, size=2)
        rank = int(rng.integers(0, min(m, n) + 1))
        a = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, n))
        pinv, detected = linalg.pseudo_inverse(a)
        assert detected == rank
        tol = 1e-10 * max(1.0, np.abs(a).max())
        npt.assert_allclose(a @ pinv @ a, a, atol=tol)
        npt.assert_allclose(pinv @ a @ pinv, pinv, atol=tol)
        npt.assert_allclose(a @ pinv, (a @ pinv).T, atol=tol)
        npt.assert_allclose(pinv @ a, (pinv @ a).T, atol=tol)


class TestPseudoLogdet:
    def test_diagonal(self):
        value, rank = linalg.pseudo_logdet(np.diag([2.0, 0.0]))
        npt.assert_allclose(value, np.log(2.0))
        assert rank == 1

    def test_identity(self):
        value, rank = linalg.pseudo_logdet(np.eye(3))
        assert value == 0.0
        assert rank == 3

    def test_rank_one(self):
        value, rank = linalg.pseudo_logdet(np.ones((2, 2)))
        npt.assert_allclose(value, np.log(2.0))
        assert rank == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_logdet_for_pd(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        a = rng.standard_normal((n, n))
        s = a @ a.T + n * np.eye(n)
        value, rank = linalg.pseudo_logdet(s)
        assert rank == n
        npt.assert_allclose(value, np.linalg.slogdet(s)[1], atol=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(linalg.FactorizationError):
            linalg.pseudo_logdet(np.diag([1.0, -1.0]))


class TestGaussianLogpdf:
    def test_standard_normal(self):
        npt.assert_allclose(
            linalg.gaussian_logpdf([0.0], [0.0], [[1.0]]), -0.5 * np.log(2 * np.pi)
        )

    def test_unit_shift(self):
        npt.assert_allclose(
            linalg.gaussian_logpdf([1.0], [0.0], [[1.0]]),
            -0.5 - 0.5 * np.log(2 * np.pi),
        )

    def test_variance_two(self):
        npt.assert_allclose(
            linalg.gaussian_logpdf([1.0], [0.0], [[2.0]]),
            -0.25 - 0.5 * np.log(4 * np.pi),
        )

    def test_rejects_non_pd(self):
        with pytest.raises(linalg.FactorizationError):
            linalg.gaussian_logpdf([0.0, 0.0], [0.0, 0.0], np.diag([1.0, 0.0]))


class TestPsdChol:
    @pytest.mark.parametrize("rank", [0, 1, 3])
    def test_singular_factor(self, rank):
        rng = np.random.default_rng(rank)
        a = rng.standard_normal((3, max(rank, 1)))
        s = a @ a.T if rank else np.zeros((3, 3))
        l = linalg.psd_chol(s)
        npt.assert_allclose(l @ l.T, s, atol=1e-10 * max(1.0, np.abs(s).max()))
        npt.assert_allclose(l, np.tril(l))
