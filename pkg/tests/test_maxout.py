"""Maxout network tests: forward pass, local gain, pattern, parameter count."""

import numpy as np
import pytest

from maxmpc.errors import BoundaryPointError
from maxmpc.maxout import (
    MaxoutLayer,
    MaxoutNetwork,
    activation_pattern,
    evaluate,
    local_gain,
    param_count,
    relu_to_maxout,
)


def paper_1d_network():
    """The two-neuron net max{−x,−1} − max{−x−1,0} from the 1-D study."""
    layer = MaxoutLayer(
        weights=np.array([[-1.0], [0.0], [-1.0], [0.0]]),
        biases=np.array([0.0, -1.0, -1.0, 0.0]),
        channels=2, neurons=2,
    )
    return MaxoutNetwork(layers=(layer,), output_weights=np.array([[1.0, -1.0]]),
                         output_biases=np.array([0.0]))


def random_network(rng, n=None, ell=None):
    n = n or int(rng.integers(1, 4))
    ell = ell or int(rng.integers(1, 3))
    layers = []
    fan = n
    for _ in range(ell):
        w = int(rng.integers(1, 5))
        p = int(rng.integers(1, 5))
        layers.append(MaxoutLayer(weights=rng.normal(size=(p * w, fan)),
                                  biases=rng.normal(size=p * w),
                                  channels=p, neurons=w))
        fan = w
    m = int(rng.integers(1, 3))
    return MaxoutNetwork(layers=tuple(layers),
                         output_weights=rng.normal(size=(m, fan)),
                         output_biases=rng.normal(size=m))


def nested_max_oracle(net, x):
    """Literal evaluation of the max formula, no argmax bookkeeping."""
    y = np.asarray(x, dtype=float)
    for layer in net.layers:
        z = layer.weights @ y + layer.biases
        y = np.array([
            max(z[s * layer.channels + j] for j in range(layer.channels))
            for s in range(layer.neurons)
        ])
    return net.output_weights @ y + net.output_biases


class TestEvaluate:
    def test_paper_network_midpoint(self):
        net = paper_1d_network()
        assert evaluate(net, [0.5])[0] == pytest.approx(-0.5, abs=1e-12)

    def test_paper_network_matches_law(self):
        net = paper_1d_network()
        for x, want in [(-2.0, 1.0), (-1.0, 1.0), (0.0, 0.0), (1.0, -1.0), (2.0, -1.0)]:
            assert evaluate(net, [x])[0] == pytest.approx(want, abs=1e-12)

    def test_single_channel_is_affine(self):
        layer = MaxoutLayer(weights=[[2.0, -1.0]], biases=[0.5], channels=1, neurons=1)
        net = MaxoutNetwork(layers=(layer,), output_weights=[[3.0]], output_biases=[1.0])
        x = np.array([0.7, -0.2])
        want = 3.0 * (2.0 * 0.7 - 1.0 * -0.2 + 0.5) + 1.0
        assert evaluate(net, x)[0] == pytest.approx(want, abs=1e-12)

    def test_matches_nested_max_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            net = random_network(rng)
            for _ in range(5):
                x = rng.normal(size=net.input_dim)
                np.testing.assert_allclose(evaluate(net, x), nested_max_oracle(net, x),
                                           atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            evaluate(paper_1d_network(), [0.1, 0.2])


class TestLocalGain:
    def test_paper_network_middle_slope(self):
        assert local_gain(paper_1d_network(), [0.5])[0, 0] == pytest.approx(-1.0)

    def test_paper_network_saturated_slope(self):
        assert local_gain(paper_1d_network(), [2.0])[0, 0] == pytest.approx(0.0)

    def test_boundary_tie_raises(self):
        with pytest.raises(BoundaryPointError):
            local_gain(paper_1d_network(), [1.0])  # kink of the law

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 40:
            net = random_network(rng)
            x = rng.normal(size=net.input_dim)
            try:
                K = local_gain(net, x, tie_tol=1e-7)
            except BoundaryPointError:
                continue
            h = 1e-6
            fd = np.zeros_like(K)
            for r in range(net.input_dim):
                e = np.zeros(net.input_dim)
                e[r] = h
                fd[:, r] = (evaluate(net, x + e) - evaluate(net, x - e)) / (2 * h)
            np.testing.assert_allclose(K, fd, atol=1e-5)
            checked += 1

    def test_piecewise_constant(self):
        rng = np.random.default_rng(9)
        checked = 0
        while checked < 20:
            net = random_network(rng)
            x = rng.normal(size=net.input_dim)
            d = rng.normal(size=net.input_dim)
            try:
                K0 = local_gain(net, x, tie_tol=1e-6)
                K1 = local_gain(net, x + 1e-9 * d, tie_tol=0.0)
            except BoundaryPointError:
                continue
            np.testing.assert_allclose(K0, K1, atol=1e-12)
            checked += 1

    def test_gain_equals_delta_product(self):
        rng = np.random.default_rng(12)
        checked = 0
        while checked < 20:
            net = random_network(rng)
            x = rng.normal(size=net.input_dim)
            try:
                K = local_gain(net, x, tie_tol=1e-8)
            except BoundaryPointError:
                continue
            pat = activation_pattern(net, x)
            prod = np.eye(net.input_dim)
            for layer, D in zip(net.layers, pat.delta_matrices(net)):
                prod = D @ layer.weights @ prod
            np.testing.assert_allclose(K, net.output_weights @ prod, atol=1e-12)
            checked += 1

    def test_first_order_consistency(self):
        net = paper_1d_network()
        rng = np.random.default_rng(33)
        for _ in range(50):
            x = rng.uniform(-2.2, 2.2)
            try:
                K = local_gain(net, [x], tie_tol=1e-3)
            except BoundaryPointError:
                continue
            h = 1e-7
            mid = evaluate(net, [x])[0]
            avg = 0.5 * (evaluate(net, [x - h])[0] + evaluate(net, [x + h])[0])
            assert abs(mid - avg) <= 1e-12  # locally affine


class TestActivationPattern:
    def test_paper_network_at_half(self):
        pat = activation_pattern(paper_1d_network(), [0.5])
        # neuron 1 picks channel 1 (−x), neuron 2 picks channel 2 (0)
        assert pat.winners == ((0, 1),)

    def test_single_channel_everywhere(self):
        layer = MaxoutLayer(weights=np.ones((2, 1)), biases=np.zeros(2),
                            channels=1, neurons=2)
        net = MaxoutNetwork(layers=(layer,), output_weights=np.ones((1, 2)),
                            output_biases=[0.0])
        pat = activation_pattern(net, [1.0])
        assert pat.winners == ((0, 0),)

    def test_pattern_reproduces_eval(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            net = random_network(rng)
            x = rng.normal(size=net.input_dim)
            pat = activation_pattern(net, x)
            y = x.copy()
            for layer, win in zip(net.layers, pat.winners):
                z = layer.preactivations(y)
                y = np.array([z[s * layer.channels + k] for s, k in enumerate(win)])
            out = net.output_weights @ y + net.output_biases
            np.testing.assert_allclose(out, evaluate(net, x), atol=1e-12)


class TestParamCount:
    @pytest.mark.parametrize("n,w1,p1,expected", [
        (1, 1, 4, 10), (1, 2, 4, 19), (1, 2, 3, 15), (1, 2, 2, 11),
        (1, 3, 2, 16), (1, 4, 2, 21), (1, 4, 1, 13),
        (2, 2, 38, 231), (2, 2, 10, 63), (2, 2, 3, 21), (2, 3, 3, 31),
        (2, 5, 3, 51), (2, 10, 3, 101), (2, 23, 3, 231),
    ])
    def test_single_layer_counts(self, n, w1, p1, expected):
        layer = MaxoutLayer(weights=np.zeros((p1 * w1, n)), biases=np.zeros(p1 * w1),
                            channels=p1, neurons=w1)
        net = MaxoutNetwork(layers=(layer,), output_weights=np.zeros((1, w1)),
                            output_biases=[0.0])
        assert param_count(net) == expected


class TestReluEmbedding:
    def test_single_neuron(self):
        net = relu_to_maxout([np.array([[1.0]]), np.array([[1.0]])],
                             [np.array([0.0]), np.array([0.0])])
        assert evaluate(net, [-1.0])[0] == pytest.approx(0.0)
        assert evaluate(net, [2.0])[0] == pytest.approx(2.0)

    def test_shape_is_two_channel(self):
        net = relu_to_maxout([np.zeros((3, 2)), np.zeros((1, 3))],
                             [np.zeros(3), np.zeros(1)])
        assert net.layers[0].channels == 2
        assert net.layers[0].weights.shape == (6, 2)

    def test_matches_direct_relu(self):
        rng = np.random.default_rng(77)
        for _ in range(5):
            dims = [int(rng.integers(1, 4)) for _ in range(3)]
            Ws = [rng.normal(size=(dims[1], dims[0])),
                  rng.normal(size=(dims[2], dims[1])),
                  rng.normal(size=(1, dims[2]))]
            bs = [rng.normal(size=dims[1]), rng.normal(size=dims[2]), rng.normal(size=1)]
            net = relu_to_maxout(Ws, bs)
            for _ in range(200):
                x = rng.normal(size=dims[0])
                y = x
                for W, b in zip(Ws[:-1], bs[:-1]):
                    y = np.maximum(0.0, W @ y + b)
                ref = Ws[-1] @ y + bs[-1]
                np.testing.assert_allclose(evaluate(net, x), ref, atol=1e-12)
