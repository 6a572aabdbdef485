import numpy as np
import pytest

from relulasso import (
    ActivationPattern,
    DataMatrix,
    Labels,
    PatternSet,
    RegularizationConvention,
    ShapeError,
    TwoLayerNet,
    balance_rescale,
    nonconvex_objective,
    predict,
)


def random_net(rng, d, m, with_bias=False):
    return TwoLayerNet(
        rng.standard_normal((d, m)),
        rng.standard_normal(m) if with_bias else None,
        rng.standard_normal(m),
    )


class TestTypes:
    def test_data_matrix_validation(self):
        with pytest.raises(ShapeError):
            DataMatrix(np.zeros((0, 3)))
        with pytest.raises(ShapeError):
            DataMatrix(np.zeros(4))
        with pytest.raises(ValueError):
            DataMatrix([[np.inf, 1.0]])
        X = DataMatrix([[1.0, 2.0], [3.0, 4.0]])
        assert (X.d, X.n) == (2, 2)
        assert not X.entries.flags.writeable

    def test_labels_validation(self):
        with pytest.raises(ValueError):
            Labels([np.nan])
        assert Labels([1.0, 2.0]).n == 2

    def test_pattern_ordering_and_dedup(self):
        a = ActivationPattern((0, 0, 1))
        b = ActivationPattern((1, 1, 0))
        assert a < b
        ps = PatternSet.from_iterable([b, a, b, ActivationPattern((0, 0, 0))])
        assert [p.bits for p in ps] == [(0, 0, 1), (1, 1, 0)]
        with pytest.raises(ValueError):
            PatternSet((b, a))  # unsorted
        with pytest.raises(ValueError):
            PatternSet((ActivationPattern((0, 0)),))  # all-zero member

    def test_pattern_json_round_trip(self):
        ps = PatternSet.from_iterable(
            [ActivationPattern((1, 1, 0)), ActivationPattern((0, 0, 1))])
        obj = ps.to_json_dict()
        assert obj == {"n": 3, "patterns": ["001", "110"]}
        assert PatternSet.from_json_dict(obj) == ps

    def test_net_validation(self):
        with pytest.raises(ShapeError):
            TwoLayerNet(np.zeros((2, 3)), None, np.zeros(2))
        with pytest.raises(ShapeError):
            TwoLayerNet(np.zeros((2, 3)), np.zeros(2), np.zeros(3))
        zero = TwoLayerNet.zero(4)
        assert zero.m == 0 and zero.d == 4

    def test_convention_calibration(self):
        conv = RegularizationConvention.from_beta(0.3)
        assert conv.nonconvex_coeff == 0.15
        with pytest.raises(ValueError):
            RegularizationConvention(0.3, 0.3)
        with pytest.raises(ValueError):
            RegularizationConvention(-1.0, -0.5)


class TestPredict:
    def test_single_neuron(self):
        net = TwoLayerNet(np.array([[2.0], [0.0]]), None, np.array([8.0]))
        out = predict(net, DataMatrix(np.array([[1.0], [1.0]])))
        assert out == pytest.approx([16.0])

    def test_zero_network(self):
        out = predict(TwoLayerNet.zero(3), DataMatrix(np.ones((3, 5))))
        assert np.array_equal(out, np.zeros(5))

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            predict(TwoLayerNet.zero(3), DataMatrix(np.ones((2, 5))))

    def test_bias_applied_additively(self):
        net = TwoLayerNet(np.array([[1.0]]), np.array([-1.0]), np.array([2.0]))
        out = predict(net, DataMatrix(np.array([[0.0, 1.0, 3.0]])))
        assert out == pytest.approx([0.0, 0.0, 4.0])

    def test_outer_scaling(self):
        rng = np.random.default_rng(0)
        net = random_net(rng, 3, 6, with_bias=True)
        X = DataMatrix(rng.standard_normal((3, 11)))
        # powers of two scale exactly; general factors to rounding error
        scaled = TwoLayerNet(net.W, net.bias, 4.0 * net.alpha)
        assert np.array_equal(predict(scaled, X), 4.0 * predict(net, X))
        scaled = TwoLayerNet(net.W, net.bias, 3.0 * net.alpha)
        np.testing.assert_allclose(predict(scaled, X), 3.0 * predict(net, X), rtol=1e-14)

    def test_neuron_rescaling_invariance(self):
        rng = np.random.default_rng(1)
        net = random_net(rng, 2, 4, with_bias=True)
        X = DataMatrix(rng.standard_normal((2, 9)))
        c = 2.0  # power of two keeps the float algebra exact
        net2 = TwoLayerNet(c * net.W, c * net.bias, net.alpha / c)
        assert np.array_equal(predict(net, X), predict(net2, X))


class TestObjective:
    def test_zero_predictor(self):
        conv = RegularizationConvention.from_beta(2.0)
        X = DataMatrix(np.array([[1.0, 0.0]]))
        assert nonconvex_objective(TwoLayerNet.zero(1), X, [1.0, 0.0], conv) == 0.5

    def test_hand_evaluated(self):
        conv = RegularizationConvention.from_beta(2.0)  # lam = 1
        net = TwoLayerNet(np.array([[1.0], [0.0]]), None, np.array([1.0]))
        X = DataMatrix(np.array([[1.0], [0.0]]))
        assert nonconvex_objective(net, X, [1.0], conv) == pytest.approx(2.0)

    def test_bias_not_regularized(self):
        conv = RegularizationConvention.from_beta(2.0)
        net0 = TwoLayerNet(np.array([[1.0]]), np.array([0.0]), np.array([1.0]))
        net1 = TwoLayerNet(np.array([[1.0]]), np.array([5.0]), np.array([1.0]))
        X = DataMatrix(np.array([[-10.0]]))  # both neurons inactive
        y = [0.0]
        assert nonconvex_objective(net0, X, y, conv) == nonconvex_objective(net1, X, y, conv)


class TestBalance:
    def test_hand_case(self):
        net = TwoLayerNet(np.array([[2.0], [0.0]]), None, np.array([8.0]))
        out = balance_rescale(net)
        assert out.W[:, 0] == pytest.approx([4.0, 0.0])
        assert out.alpha == pytest.approx([4.0])

    def test_fixed_point(self):
        net = TwoLayerNet(np.array([[1.0], [0.0]]), None, np.array([1.0]))
        out = balance_rescale(net)
        assert np.array_equal(out.W, net.W)
        assert np.array_equal(out.alpha, net.alpha)

    def test_degenerate_neuron_flagged(self):
        net = TwoLayerNet(np.zeros((2, 1)), None, np.array([3.0]))
        out = balance_rescale(net)
        assert np.array_equal(out.W, net.W)
        assert out.alpha == pytest.approx([3.0])
        assert "degenerate-neuron" in out.meta.flags

    def test_random_nets_prediction_and_decay(self):
        rng = np.random.default_rng(7)
        conv = RegularizationConvention.from_beta(1.0)
        for _ in range(100):
            d = int(rng.integers(1, 4))
            m = int(rng.integers(1, 6))
            net = random_net(rng, d, m, with_bias=bool(rng.integers(2)))
            X = DataMatrix(rng.standard_normal((d, 100)))
            out = balance_rescale(net)
            before = predict(net, X)
            after = predict(out, X)
            assert np.max(np.abs(before - after)) <= 1e-10 * (1 + np.max(np.abs(before)))
            y = rng.standard_normal(100)
            assert nonconvex_objective(out, X, y, conv) <= nonconvex_objective(net, X, y, conv) + 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(9)
        net = random_net(rng, 3, 5)
        once = balance_rescale(net)
        twice = balance_rescale(once)
        assert np.max(np.abs(once.W - twice.W)) <= 1e-12
        assert np.max(np.abs(once.alpha - twice.alpha)) <= 1e-12
