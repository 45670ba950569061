import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepstack.exceptions import ParameterError, ShapeError
from deepstack.linalg import (
    col_means,
    map_elements,
    matmul,
    naive_matmul,
    strassen_matmul,
    transpose,
    zip_elements,
)


def close(a, b, tol=1e-9):
    return np.all(np.abs(a - b) <= tol * (1.0 + np.abs(b)))


class TestMatmul:
    def test_identity_left(self, rng):
        A = rng.normal(size=(2, 2))
        for algo in ("naive", "strassen", "auto"):
            np.testing.assert_array_equal(matmul(np.eye(2), A, algo), A)

    def test_hand_summation_3x5_5x2(self):
        a = np.arange(15, dtype=float).reshape(3, 5)
        b = np.arange(10, dtype=float).reshape(5, 2) - 4
        expected = [[sum(a[i, p] * b[p, j] for p in range(5)) for j in range(2)] for i in range(3)]
        for algo in ("naive", "strassen"):
            np.testing.assert_array_equal(matmul(a, b, algo), expected)

    def test_strassen_64_matches_naive(self, rng):
        a = rng.uniform(-1, 1, (64, 64))
        b = rng.uniform(-1, 1, (64, 64))
        assert close(strassen_matmul(a, b, cutoff=4), naive_matmul(a, b))

    def test_naive_matches_blas(self, rng):
        a = rng.normal(size=(17, 9))
        b = rng.normal(size=(9, 4))
        np.testing.assert_allclose(naive_matmul(a, b), a @ b, rtol=1e-12, atol=1e-12)

    def test_mismatch_reports_both_shapes(self):
        with pytest.raises(ShapeError, match=r"3x4.*5x2"):
            matmul(np.ones((3, 4)), np.ones((5, 2)))

    def test_unknown_algo(self):
        with pytest.raises(ParameterError):
            matmul(np.ones((2, 2)), np.ones((2, 2)), "winograd")

    def test_non_2d_rejected(self):
        with pytest.raises(ShapeError):
            matmul(np.ones(3), np.ones((3, 1)))

    def test_auto_picks_naive_below_threshold(self, monkeypatch):
        import deepstack.linalg as la

        calls = []
        monkeypatch.setattr(la, "strassen_matmul", lambda a, b, c: calls.append(1) or a @ b)
        la.matmul(np.ones((512, 511)), np.ones((511, 512)))
        assert calls == []
        la.matmul(np.ones((512, 512)), np.ones((512, 512)))
        assert calls == [1]

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_associativity(self, m, k, n, p, seed):
        r = np.random.default_rng(seed)
        A, B, C = r.uniform(-1, 1, (m, k)), r.uniform(-1, 1, (k, n)), r.uniform(-1, 1, (n, p))
        left = matmul(matmul(A, B, "strassen"), C, "strassen")
        right = matmul(A, matmul(B, C, "naive"), "naive")
        assert close(left, right)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 33), st.integers(1, 33), st.integers(1, 33), st.sampled_from([1, 2, 4, 8]),
           st.integers(0, 2**32 - 1))
    def test_strassen_shape_and_value(self, m, k, n, cutoff, seed):
        r = np.random.default_rng(seed)
        a, b = r.uniform(-1, 1, (m, k)), r.uniform(-1, 1, (k, n))
        out = strassen_matmul(a, b, cutoff)
        assert out.shape == (m, n)
        assert close(out, naive_matmul(a, b))


class TestElementwise:
    def test_transpose_examples(self):
        np.testing.assert_array_equal(transpose([[7.0]]), [[7.0]])
        np.testing.assert_array_equal(transpose([[1, 2, 3], [4, 5, 6]]), [[1, 4], [2, 5], [3, 6]])

    def test_transpose_involution(self, rng):
        a = rng.normal(size=(7, 3))
        np.testing.assert_array_equal(transpose(transpose(a)), a)

    def test_map_identity(self, rng):
        a = rng.normal(size=(3, 4))
        np.testing.assert_array_equal(map_elements(a, lambda x: x), a)

    def test_zip(self, rng):
        a = rng.normal(size=(3, 4))
        np.testing.assert_array_equal(zip_elements(a, a, lambda x, y: x - y), np.zeros((3, 4)))
        np.testing.assert_array_equal(zip_elements([[1, 2]], [[3, 4]], lambda x, y: x * y), [[3, 8]])

    def test_zip_shape_mismatch(self):
        with pytest.raises(ShapeError):
            zip_elements(np.ones((2, 2)), np.ones((2, 3)), lambda x, y: x)


class TestColMeans:
    def test_examples(self):
        np.testing.assert_array_equal(col_means([[1.0], [3.0]]), [[2.0]])
        np.testing.assert_array_equal(col_means(np.full((4, 3), 2.5)), [[2.5, 2.5, 2.5]])
        np.testing.assert_array_equal(col_means([[0, 1], [1, 1]]), [[0.5, 1.0]])

    def test_empty(self):
        with pytest.raises(ShapeError):
            col_means(np.zeros((0, 3)))
