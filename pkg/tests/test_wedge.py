import itertools

import numpy as np
import pytest

from relulasso import (
    DataMatrix,
    ScaleLimitError,
    TrainConfig,
    build_univariate_dictionary,
    build_wedge_dictionary,
    lp_weight_decay_objective,
    predict,
    realize_planar_network,
    train_sgd,
    train_wedge_lasso,
    wedge_beta_max,
    wedge_signed_volume,
)


def _perm_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class TestSignedVolume:
    def test_identity(self):
        assert wedge_signed_volume([np.array([1.0, 0.0]), np.array([0.0, 1.0])]) == 1.0

    def test_parallel_vectors_degenerate(self):
        assert wedge_signed_volume([np.array([2.0, 2.0]), np.array([3.0, 3.0])]) == 0.0

    def test_swap_negates_exactly(self):
        rng = np.random.default_rng(0)
        for k in (2, 3):
            vs = [rng.standard_normal(k) for _ in range(k)]
            base = wedge_signed_volume(vs)
            swapped = wedge_signed_volume([vs[1], vs[0]] + vs[2:])
            assert swapped == -base

    def test_permutation_signs_exhaustive(self):
        rng = np.random.default_rng(1)
        for k in (2, 3):
            vs = [rng.standard_normal(k) for _ in range(k)]
            base = wedge_signed_volume(vs)
            for perm in itertools.permutations(range(k)):
                sign = _perm_sign(perm)
                got = wedge_signed_volume([vs[i] for i in perm])
                assert got == pytest.approx(sign * base, rel=1e-12, abs=1e-14)

    def test_scaling_one_argument(self):
        rng = np.random.default_rng(2)
        for k in (1, 2, 3):
            vs = [rng.standard_normal(k) for _ in range(k)]
            base = wedge_signed_volume(vs)
            scaled = [v.copy() for v in vs]
            scaled[0] = 4.0 * scaled[0]  # power of two scales exactly
            assert wedge_signed_volume(scaled) == 4.0 * base
            scaled[0] = (2.7 / 4.0) * scaled[0]
            assert wedge_signed_volume(scaled) == pytest.approx(2.7 * base, rel=1e-12)

    def test_agrees_with_lu_determinant(self):
        rng = np.random.default_rng(3)
        for k in (2, 3, 4, 5):
            M = rng.standard_normal((k, k))
            got = wedge_signed_volume([M[:, j] for j in range(k)])
            assert got == pytest.approx(float(np.linalg.det(M)), rel=1e-10)


class TestDictionary:
    def test_planar_entry(self):
        X = DataMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]))
        dico = build_wedge_dictionary(X, p=2)
        j = dico.multi_indices.index((1,))
        assert dico.A[0, j] == pytest.approx(2.0)

    def test_parallel_points_give_zero(self):
        X = DataMatrix(np.array([[2.0, 3.0, 1.0], [2.0, 3.0, 0.0]]))
        dico = build_wedge_dictionary(X, p=2)
        j = dico.multi_indices.index((1,))
        assert dico.A[0, j] == 0.0  # first two columns are parallel

    def test_entries_nonnegative(self):
        rng = np.random.default_rng(4)
        X = DataMatrix(rng.standard_normal((2, 8)))
        for bias in (False, True):
            dico = build_wedge_dictionary(X, p=2, with_bias=bias)
            assert np.all(dico.A >= 0.0)

    def test_scalar_with_bias_reduces_to_hinges(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            xs = rng.standard_normal(6)
            dico = build_wedge_dictionary(DataMatrix(xs[None, :]), p=2, with_bias=True)
            hinge = build_univariate_dictionary(xs, "relu")
            assert np.array_equal(dico.A, hinge.Aplus)

    def test_coincident_bias_points_dropped(self):
        X = DataMatrix(np.array([[0.0, 1.0, 1.0], [0.0, 2.0, 2.0]]))
        dico = build_wedge_dictionary(X, p=2, with_bias=True)
        assert (1, 2) in dico.dropped

    def test_scale_covariance_planar(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((2, 6))
        a = build_wedge_dictionary(DataMatrix(X), p=2).A
        b = build_wedge_dictionary(DataMatrix(2.0 * X), p=2).A
        np.testing.assert_allclose(b, 2.0 * a, rtol=1e-12)

    def test_p1_guard(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError):
            build_wedge_dictionary(DataMatrix(rng.standard_normal((3, 5))), p=1)


class TestTraining:
    def test_zero_above_threshold(self):
        rng = np.random.default_rng(8)
        X = DataMatrix(rng.standard_normal((2, 6)))
        y = rng.standard_normal(6)
        bm = wedge_beta_max(X, y, p=2)
        fit = train_wedge_lasso(X, y, 1.01 * bm, p=2, tol=1e-9)
        assert np.all(fit.z == 0.0)

    def test_matches_univariate_for_scalar_bias(self):
        rng = np.random.default_rng(9)
        xs = rng.standard_normal(8)
        y = rng.standard_normal(8)
        from relulasso import solve_univariate

        fit_w = train_wedge_lasso(DataMatrix(xs[None, :]), y, 0.3, p=2,
                                  with_bias=True, tol=1e-11)
        fit_u = solve_univariate(xs, y, 0.3, activation="relu", tol=1e-11)
        assert fit_w.objective == pytest.approx(fit_u.objective, abs=1e-8)

    def test_scale_guard(self):
        rng = np.random.default_rng(10)
        with pytest.raises(ScaleLimitError):
            train_wedge_lasso(DataMatrix(rng.standard_normal((4, 5))), np.ones(5), 0.1)

    def test_realized_network_reproduces_fit(self):
        rng = np.random.default_rng(11)
        X = DataMatrix(rng.standard_normal((2, 5)))
        y = rng.standard_normal(5)
        for p in (1, 2):
            fit = train_wedge_lasso(X, y, 0.2, p=p, tol=1e-11)
            net = realize_planar_network(fit, X)
            np.testing.assert_allclose(predict(net, X), fit.fitted, atol=1e-10)
            obj = lp_weight_decay_objective(net, X, y, 0.2, p)
            assert obj == pytest.approx(fit.objective, abs=1e-9)

    def test_l1_training_is_globally_optimal(self):
        rng = np.random.default_rng(12)
        X = DataMatrix(rng.standard_normal((2, 4)))
        y = rng.standard_normal(4)
        beta = 0.2
        fit = train_wedge_lasso(X, y, beta, p=1, tol=1e-11)
        cfg = TrainConfig(learning_rate=0.5, epochs=400, restarts=50, seed=1,
                          weight_decay=beta / 2, backtrack=True, rebalance_every=50)
        net, _ = train_sgd(X, y, 10, cfg)
        sgd_l1 = lp_weight_decay_objective(net, X, y, beta, p=1)
        assert fit.objective <= sgd_l1 + 1e-9
