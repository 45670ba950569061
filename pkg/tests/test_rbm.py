import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepstack.exceptions import CapacityError, ParameterError, ShapeError
from deepstack.optim import finite_diff_gradient
from deepstack.rbm import (
    CdConfig,
    RbmParams,
    all_binary,
    cd_update,
    energy,
    energy_sum,
    exact_loglik,
    exact_loglik_gradient,
    exact_marginal,
    exact_partition,
    hidden_probs,
    init_rbm,
    log_partition,
    sample_bernoulli,
    train_rbm,
    visible_probs,
)

SIGMOID_1 = 0.7310585786300049  # 1 / (1 + e^-1)
SIGMOID_M1 = 0.2689414213699951
LOGIT_CLAMP = -6.906754778648554  # log(0.001 / 0.999)


def random_rbm(rng, nv, nh, scale=1.0):
    return RbmParams(rng.normal(0, scale, (nv, nh)), rng.normal(0, scale, nv), rng.normal(0, scale, nh))


def zero_rbm(nv, nh):
    return RbmParams(np.zeros((nv, nh)), np.zeros(nv), np.zeros(nh))


class TestEnergy:
    def test_zero_parameters(self):
        rbm = zero_rbm(3, 2)
        for v in all_binary(3):
            for h in all_binary(2):
                assert energy(rbm, v, h) == 0.0

    def test_worked_example(self):
        rbm = RbmParams([[2.0], [-1.0]], [0.5, 0.0], [-1.0])
        assert energy(rbm, [1, 0], [1]) == -1.5
        assert energy_sum(rbm, [1, 0], [1]) == -1.5

    def test_matrix_and_sum_forms_agree(self, rng):
        rbm = random_rbm(rng, 5, 4)
        for _ in range(100):
            v = rng.integers(0, 2, 5)
            h = rng.integers(0, 2, 4)
            assert abs(energy(rbm, v, h) - energy_sum(rbm, v, h)) <= 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            energy(zero_rbm(2, 1), [1, 0, 1], [1])


class TestConditionals:
    def test_zero_parameters(self):
        rbm = zero_rbm(3, 2)
        np.testing.assert_array_equal(hidden_probs(rbm, np.ones((2, 3))), 0.5)
        np.testing.assert_array_equal(visible_probs(rbm, np.ones((2, 2))), 0.5)

    def test_hidden_example(self):
        rbm = RbmParams([[2.0], [-1.0]], [0.0, 0.0], [0.0])
        assert hidden_probs(rbm, [[1, 1]])[0, 0] == pytest.approx(SIGMOID_1, rel=1e-15)

    def test_visible_example(self):
        rbm = RbmParams([[-2.0]], [1.0], [0.0])
        assert visible_probs(rbm, [[1]])[0, 0] == pytest.approx(SIGMOID_M1, rel=1e-15)

    def test_transposed_symmetry(self, rng):
        rbm = random_rbm(rng, 4, 3)
        H = rng.integers(0, 2, (5, 3)).astype(float)
        np.testing.assert_array_equal(visible_probs(rbm, H), hidden_probs(rbm.transposed(), H))

    def test_factorization_by_enumeration(self, rng):
        rbm = random_rbm(rng, 3, 2)
        H = all_binary(2)
        for v in all_binary(3):
            weights = np.array([np.exp(-energy(rbm, v, h)) for h in H])
            joint = weights / weights.sum()
            p = hidden_probs(rbm, v[None, :])[0]
            product = np.array([np.prod(np.where(h == 1, p, 1 - p)) for h in H])
            np.testing.assert_allclose(joint, product, rtol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            hidden_probs(zero_rbm(3, 2), np.ones((1, 4)))
        with pytest.raises(ShapeError):
            visible_probs(zero_rbm(3, 2), np.ones((1, 3)))


class TestSampling:
    def test_degenerate(self, rng):
        np.testing.assert_array_equal(sample_bernoulli(np.zeros((3, 4)), rng), 0.0)
        np.testing.assert_array_equal(sample_bernoulli(np.ones((3, 4)), rng), 1.0)

    def test_rate(self, rng):
        assert 0.29 <= sample_bernoulli(np.full(100_000, 0.3), rng).mean() <= 0.31

    def test_invalid(self, rng):
        with pytest.raises(ParameterError):
            sample_bernoulli(np.array([1.2]), rng)


class TestCd:
    def test_zero_learning_rate_is_noop(self, rng):
        rbm = random_rbm(rng, 4, 3)
        before = rbm.copy()
        V = rng.integers(0, 2, (6, 4)).astype(float)
        _, _, err = cd_update(rbm, V, CdConfig(learning_rate=0.0, momentum=0.5, weight_decay=0.1), None, rng)
        for a, b in zip(rbm.parameters(), before.parameters()):
            np.testing.assert_array_equal(a, b)
        assert err > 0

    def test_always_on_unit_bias_rises(self):
        V = np.ones((10, 1))
        for seed in range(20):
            r = np.random.default_rng(seed)
            rbm = RbmParams(r.normal(0, 0.01, (1, 2)), [0.0], [0.0, 0.0])
            velocity = None
            biases = [rbm.a[0]]
            for _ in range(30):
                _, velocity, _ = cd_update(rbm, V, CdConfig(learning_rate=0.1), velocity, r)
                biases.append(rbm.a[0])
            assert np.all(np.diff(biases) > 0)

    def test_weight_decay_only_on_weights(self, rng):
        rbm = random_rbm(rng, 3, 2)
        V = rng.integers(0, 2, (4, 3)).astype(float)
        plain, decayed = rbm.copy(), rbm.copy()
        cd_update(plain, V, CdConfig(learning_rate=0.1), None, np.random.default_rng(1))
        cd_update(decayed, V, CdConfig(learning_rate=0.1, weight_decay=0.05), None, np.random.default_rng(1))
        np.testing.assert_allclose(decayed.W, plain.W - 0.1 * 2 * 0.05 * rbm.W, rtol=1e-12, atol=1e-15)
        np.testing.assert_array_equal(decayed.a, plain.a)
        np.testing.assert_array_equal(decayed.b, plain.b)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            cd_update(zero_rbm(3, 2), np.ones((2, 4)), CdConfig(), None, rng)

    def test_invalid_config(self):
        with pytest.raises(ParameterError):
            CdConfig(k=0)


class TestInit:
    def test_biases(self, rng):
        data = np.array([[1, 0, 1], [0, 0, 1]], dtype=float)
        rbm = init_rbm(3, 4, data, rng)
        assert rbm.a[0] == 0.0
        assert rbm.a[1] == pytest.approx(LOGIT_CLAMP, rel=1e-15)
        assert rbm.a[2] == pytest.approx(-LOGIT_CLAMP, rel=1e-15)
        np.testing.assert_array_equal(rbm.b, 0.0)

    def test_weight_scale(self, rng):
        rbm = init_rbm(100, 50, rng.random((3, 100)), rng)
        assert 0.009 <= rbm.W.std() <= 0.011

    def test_empty_data(self, rng):
        with pytest.raises(ParameterError):
            init_rbm(3, 2, np.zeros((0, 3)), rng)


class TestExact:
    def test_zero_partition(self):
        assert exact_partition(zero_rbm(2, 1)) == pytest.approx(8.0, rel=1e-15)

    def test_zero_marginal_uniform(self):
        rbm = zero_rbm(3, 2)
        for v in all_binary(3):
            assert exact_marginal(rbm, v) == pytest.approx(1 / 8, rel=1e-14)

    def test_partition_matches_brute_force(self, rng):
        rbm = random_rbm(rng, 3, 3)
        brute = sum(np.exp(-energy(rbm, v, h)) for v in all_binary(3) for h in all_binary(3))
        assert exact_partition(rbm) == pytest.approx(brute, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_marginals_sum_to_one(self, nv, nh, seed):
        rbm = random_rbm(np.random.default_rng(seed), nv, nh)
        total = sum(exact_marginal(rbm, v) for v in all_binary(nv))
        assert abs(total - 1.0) <= 1e-12

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            log_partition(zero_rbm(20, 5))

    def test_chunked_partition(self, rng):
        rbm = random_rbm(rng, 8, 2, 0.3)
        assert log_partition(rbm, chunk=7) == pytest.approx(log_partition(rbm), rel=1e-13)

    def test_gradient_matches_finite_differences(self, rng):
        rbm = random_rbm(rng, 4, 3, 0.5)
        data = rng.integers(0, 2, (6, 4)).astype(float)
        analytic = exact_loglik_gradient(rbm, data)
        numeric = finite_diff_gradient(lambda: exact_loglik(rbm, data), rbm.parameters(), 1e-5)
        for a, n in zip(analytic, numeric):
            np.testing.assert_allclose(a, n, atol=1e-6)

    def test_cd1_improves_likelihood(self):
        data = np.array([[1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=float)
        improved = 0
        for seed in range(20):
            r = np.random.default_rng(seed)
            rbm = init_rbm(3, 2, data, r)
            before = exact_loglik(rbm, data)
            train_rbm(data, 2, CdConfig(learning_rate=0.05, epochs=500, batch_size=4), r, rbm=rbm)
            improved += exact_loglik(rbm, data) > before
        assert improved >= 19


def test_all_binary_order():
    np.testing.assert_array_equal(all_binary(2), [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert list(map(tuple, all_binary(3))) == list(itertools.product((0.0, 1.0), repeat=3))
