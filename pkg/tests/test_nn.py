import numpy as np
import pytest
from conftest import gradient_check, random_small_net
from hypothesis import given, settings
from hypothesis import strategies as st

from ualearn.errors import ShapeError
from ualearn.nn import (
    CrossEntropyLoss,
    FocalLoss,
    Gradients,
    LayerSpec,
    Network,
    TrainConfig,
    adam_step,
    forward,
    loss_and_grad,
    predict_labels,
    train,
    with_dropout_rate,
    _per_sample_loss_and_grad,
)


def zeroed(net):
    for W in net.weights:
        W[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    return net


class TestLayerSpecValidation:
    def test_dropout_rate_must_be_below_one(self):
        with pytest.raises(ValueError):
            LayerSpec(2, 2, dropout_rate=1.0)

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            LayerSpec(2, 2, activation="tanh")

    def test_softmax_only_final(self):
        with pytest.raises(ValueError):
            Network.init([LayerSpec(2, 3, "softmax"), LayerSpec(3, 2, "softmax")])

    def test_softmax_with_dropout_rejected(self):
        with pytest.raises(ValueError):
            Network.init([LayerSpec(2, 3, "softmax", dropout_rate=0.2)])

    def test_widths_must_chain(self):
        with pytest.raises(ShapeError):
            Network.init([LayerSpec(2, 3), LayerSpec(4, 2, "softmax")])


class TestForward:
    def test_zero_weight_softmax_is_uniform(self):
        net = zeroed(Network.init([LayerSpec(3, 3, "softmax")], seed=0))
        probs, _ = forward(net, np.zeros((1, 3)))
        np.testing.assert_allclose(probs, np.full((1, 3), 1.0 / 3.0), atol=1e-15)

    def test_zero_dropout_rate_is_a_no_op(self):
        net = Network.init([LayerSpec(4, 5, "relu", 0.0), LayerSpec(5, 3, "softmax")], seed=2)
        X = np.random.default_rng(0).normal(size=(6, 4))
        on, _ = forward(net, X, dropout_active=True, rng=np.random.default_rng(1))
        off, _ = forward(net, X, dropout_active=False)
        assert np.array_equal(on, off)

    def test_hand_computed_two_by_two_softmax(self):
        # x=[1,2], W=[[1,-1],[0.5,2]], b=[0.1,-0.2] -> z=[2.1, 2.8],
        # expected probabilities from an independent scalar evaluation.
        net = Network(
            [LayerSpec(2, 2, "softmax")],
            [np.array([[1.0, -1.0], [0.5, 2.0]])],
            [np.array([0.1, -0.2])],
        )
        probs, _ = forward(net, np.array([[1.0, 2.0]]))
        np.testing.assert_allclose(
            probs[0], [0.33181222783183395, 0.6681877721681659], atol=1e-14
        )

    def test_wrong_input_width_raises(self):
        net = Network.init([LayerSpec(3, 2, "softmax")], seed=0)
        with pytest.raises(ShapeError):
            forward(net, np.zeros((1, 4)))

    def test_dropout_requires_rng(self):
        net = Network.init([LayerSpec(3, 4, "relu", 0.5), LayerSpec(4, 2, "softmax")], seed=0)
        with pytest.raises(ValueError):
            forward(net, np.zeros((1, 3)), dropout_active=True, rng=None)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            net = random_small_net(rng, n_classes=int(rng.integers(2, 6)))
            X = rng.normal(size=(5, net.input_width))
            probs, _ = forward(net, X)
            assert np.all(probs >= 0.0) and np.all(probs <= 1.0)
            np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestLosses:
    def test_focal_saturated_prediction_has_zero_loss(self):
        # A huge logit pins p_t to 1 up to the clamp; the loss must vanish.
        net = zeroed(Network.init([LayerSpec(2, 3, "softmax")], seed=0))
        net.biases[0][:] = [500.0, 0.0, 0.0]
        value, _ = loss_and_grad(net, np.zeros((1, 2)), [0], FocalLoss(alpha=4, gamma=2))
        assert 0.0 <= value < 1e-20

    def test_focal_alpha1_gamma0_equals_unweighted_cross_entropy(self):
        rng = np.random.default_rng(3)
        net = random_small_net(rng, n_classes=4)
        X = rng.normal(size=(8, net.input_width))
        y = rng.integers(0, 4, size=8)
        ce_val, ce_grads = loss_and_grad(net, X, y, CrossEntropyLoss())
        f_val, f_grads = loss_and_grad(net, X, y, FocalLoss(alpha=1.0, gamma=0.0))
        assert ce_val == pytest.approx(f_val, abs=1e-12)
        for a, b in zip(ce_grads.weights + ce_grads.biases, f_grads.weights + f_grads.biases):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_focal_hand_value_at_point_nine(self):
        # sigmoid(logit(0.9)) head gives p_t = 0.9 for label 1;
        # 4 * 0.1**2 * (-ln 0.9) evaluated independently.
        net = zeroed(Network.init([LayerSpec(1, 1, "sigmoid")], seed=0))
        net.biases[0][0] = np.log(9.0)
        value, _ = loss_and_grad(net, np.zeros((1, 1)), [1], FocalLoss(alpha=4, gamma=2))
        assert value == pytest.approx(0.004214420626313052, abs=1e-9)

    def test_l2_zero_reproduces_pure_data_loss(self):
        rng = np.random.default_rng(4)
        net = random_small_net(rng)
        X = rng.normal(size=(5, net.input_width))
        y = rng.integers(0, 3, size=5)
        plain, _ = loss_and_grad(net, X, y, CrossEntropyLoss(), l2=0.0)
        with_l2, _ = loss_and_grad(net, X, y, CrossEntropyLoss(), l2=0.01)
        penalty = 0.5 * 0.01 * sum(float((W**2).sum()) for W in net.weights)
        assert with_l2 == pytest.approx(plain + penalty, rel=1e-12)

    def test_weighted_cross_entropy_scales_per_class(self):
        net = zeroed(Network.init([LayerSpec(2, 2, "softmax")], seed=0))
        X = np.zeros((2, 2))
        y = np.array([0, 1])
        unweighted, _ = loss_and_grad(net, X, y, CrossEntropyLoss())
        weighted, _ = loss_and_grad(net, X, y, CrossEntropyLoss(class_weights=[2.0, 2.0]))
        assert weighted == pytest.approx(2.0 * unweighted, rel=1e-12)

    def test_labels_out_of_range(self):
        net = Network.init([LayerSpec(2, 3, "softmax")], seed=0)
        with pytest.raises(ValueError):
            loss_and_grad(net, np.zeros((1, 2)), [3], CrossEntropyLoss())

    def test_class_weight_length_checked(self):
        net = Network.init([LayerSpec(2, 3, "softmax")], seed=0)
        with pytest.raises(ShapeError):
            loss_and_grad(net, np.zeros((1, 2)), [0], CrossEntropyLoss(class_weights=[1.0, 1.0]))

    @given(
        p_low=st.floats(min_value=1e-6, max_value=1.0 - 2e-6, exclude_max=True),
        delta=st.floats(min_value=1e-6, max_value=0.5),
        alpha=st.floats(min_value=0.1, max_value=8.0),
        gamma=st.floats(min_value=0.0, max_value=5.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_focal_nonnegative_and_decreasing_in_pt(self, p_low, delta, alpha, gamma):
        p_high = min(p_low + delta, 1.0 - 1e-6)
        loss = FocalLoss(alpha=alpha, gamma=gamma)
        lo, _ = _per_sample_loss_and_grad(loss, np.array([p_low]), np.ones(1))
        hi, _ = _per_sample_loss_and_grad(loss, np.array([p_high]), np.ones(1))
        assert lo[0] >= 0.0 and hi[0] >= 0.0
        assert lo[0] > hi[0]


class TestGradientChecks:
    def test_analytic_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        losses = [
            CrossEntropyLoss(),
            CrossEntropyLoss(class_weights=[0.5, 2.0, 1.5]),
            FocalLoss(alpha=4.0, gamma=2.0),
        ]
        for loss in losses:
            for _ in range(3):
                net = random_small_net(rng, n_classes=3)
                X = rng.normal(size=(4, net.input_width))
                y = rng.integers(0, 3, size=4)
                err, _ = gradient_check(net, X, y, loss, l2=float(rng.choice([0.0, 0.01])))
                assert err < 1e-4

    def test_sigmoid_head_gradients(self):
        rng = np.random.default_rng(12)
        for loss in (CrossEntropyLoss(class_weights=[1.0, 4.0]), FocalLoss(4.0, 2.0)):
            net = random_small_net(rng, final="sigmoid", n_classes=2)
            X = rng.normal(size=(5, net.input_width))
            y = rng.integers(0, 2, size=5)
            err, _ = gradient_check(net, X, y, loss)
            assert err < 1e-4


class TestAdam:
    def test_zero_gradient_leaves_fresh_network_unchanged(self):
        net = Network.init([LayerSpec(3, 2, "softmax")], seed=5)
        before_w = [W.copy() for W in net.weights]
        grads = Gradients(
            weights=[np.zeros_like(W) for W in net.weights],
            biases=[np.zeros_like(b) for b in net.biases],
        )
        adam_step(net, grads, learning_rate=0.1)
        assert net.step == 1
        for W, old in zip(net.weights, before_w):
            np.testing.assert_array_equal(W, old)

    def test_first_step_moves_by_learning_rate(self):
        net = Network([LayerSpec(1, 1, "identity")], [np.array([[1.0]])], [np.zeros(1)])
        grads = Gradients(weights=[np.array([[1.0]])], biases=[np.zeros(1)])
        adam_step(net, grads, learning_rate=0.001)
        assert net.weights[0][0, 0] == pytest.approx(0.99900000001, abs=1e-12)

    def test_two_steps_match_scalar_oracle(self):
        # Trace computed by an independent scalar Adam implementation.
        net = Network([LayerSpec(1, 1, "identity")], [np.array([[1.0]])], [np.zeros(1)])
        grads = Gradients(weights=[np.array([[0.3]])], biases=[np.array([0.1])])
        adam_step(net, grads, learning_rate=0.001)
        assert net.weights[0][0, 0] == pytest.approx(0.9990000000333333, abs=1e-15)
        assert net.biases[0][0] == pytest.approx(-0.00099999990000001, abs=1e-15)
        adam_step(net, grads, learning_rate=0.001)
        assert net.weights[0][0, 0] == pytest.approx(0.9980000000666667, abs=1e-15)
        assert net.biases[0][0] == pytest.approx(-0.0019999998000000126, abs=1e-15)

    def test_shape_mismatch(self):
        net = Network.init([LayerSpec(2, 2, "softmax")], seed=0)
        grads = Gradients(weights=[np.zeros((3, 3))], biases=[np.zeros(2)])
        with pytest.raises(ShapeError):
            adam_step(net, grads, learning_rate=0.1)


def separable_blobs(rng, n_per_class=100):
    X0 = rng.normal(loc=(-4.0, -4.0), scale=0.5, size=(n_per_class, 2))
    X1 = rng.normal(loc=(4.0, 4.0), scale=0.5, size=(n_per_class, 2))
    X = np.vstack([X0, X1])
    y = np.r_[np.zeros(n_per_class, dtype=int), np.ones(n_per_class, dtype=int)]
    return X, y


class TestTrain:
    def test_separable_blobs_reach_99_percent(self):
        X, y = separable_blobs(np.random.default_rng(0))
        net = Network.init([LayerSpec(2, 8, "relu"), LayerSpec(8, 2, "softmax")], seed=1)
        cfg = TrainConfig(epochs=50, batch_size=32, learning_rate=0.01, seed=2)
        trained, history = net, None
        trained, history = train(net, X, y, cfg, CrossEntropyLoss())
        assert len(history) == 50
        assert history[-1].accuracy >= 0.99

    def test_zero_epochs_forbidden(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)

    def test_empty_dataset_rejected(self):
        net = Network.init([LayerSpec(2, 2, "softmax")], seed=0)
        with pytest.raises(ValueError):
            train(net, np.zeros((0, 2)), np.zeros(0, dtype=int), TrainConfig(), CrossEntropyLoss())

    def test_same_seed_gives_bit_identical_weights(self):
        X, y = separable_blobs(np.random.default_rng(3), n_per_class=40)
        net = Network.init(
            [LayerSpec(2, 6, "relu", 0.3), LayerSpec(6, 2, "softmax")], seed=4
        )
        cfg = TrainConfig(epochs=5, batch_size=16, learning_rate=0.01,
                          dropout_active=True, seed=9)
        first, _ = train(net, X, y, cfg, CrossEntropyLoss())
        second, _ = train(net, X, y, cfg, CrossEntropyLoss())
        for a, b in zip(first.weights + first.biases, second.weights + second.biases):
            np.testing.assert_array_equal(a, b)

    def test_train_does_not_mutate_input_network(self):
        X, y = separable_blobs(np.random.default_rng(5), n_per_class=20)
        net = Network.init([LayerSpec(2, 4, "relu"), LayerSpec(4, 2, "softmax")], seed=6)
        before = [W.copy() for W in net.weights]
        train(net, X, y, TrainConfig(epochs=1), CrossEntropyLoss())
        for W, old in zip(net.weights, before):
            np.testing.assert_array_equal(W, old)


class TestDropout:
    def test_inverted_dropout_preserves_expectation(self):
        # The output layer is linear in the masked activations, so the mean
        # over masks must match the dropout-disabled output per unit.
        net = Network.init(
            [LayerSpec(5, 12, "relu", dropout_rate=0.4), LayerSpec(12, 4, "identity")],
            seed=21,
        )
        x = np.random.default_rng(1).normal(size=5)
        reps = np.tile(x, (10_000, 1))  # each row draws its own mask
        sampled, _ = forward(net, reps, dropout_active=True, rng=np.random.default_rng(2))
        det, _ = forward(net, x[None, :], dropout_active=False)
        mean = sampled.mean(axis=0)
        se = sampled.std(axis=0, ddof=1) / np.sqrt(sampled.shape[0])
        assert np.all(np.abs(mean - det[0]) <= 3.0 * se + 1e-12)

    def test_with_dropout_rate_rewrites_hidden_layers_only(self):
        net = Network.init(
            [LayerSpec(3, 4, "relu", 0.1), LayerSpec(4, 3, "softmax")], seed=0
        )
        bumped = with_dropout_rate(net, 0.5)
        assert bumped.layers[0].dropout_rate == 0.5
        assert bumped.layers[1].dropout_rate == 0.0
        np.testing.assert_array_equal(bumped.weights[0], net.weights[0])


class TestPredict:
    def test_sigmoid_head_predicts_binary_labels(self):
        net = zeroed(Network.init([LayerSpec(2, 1, "sigmoid")], seed=0))
        net.biases[0][0] = 3.0  # p ~ 0.95 -> class 1
        assert predict_labels(net, np.zeros((1, 2)))[0] == 1
        net.biases[0][0] = -3.0
        assert predict_labels(net, np.zeros((1, 2)))[0] == 0
