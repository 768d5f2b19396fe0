"""Dense feedforward networks trained from scratch with backprop and Adam.

The model is an ordered stack of fully connected layers, each described by a
:class:`LayerSpec` (widths, activation, dropout rate). Dropout is *inverted*:
when active, each retained unit is scaled by ``1/(1-rate)`` so the expected
pre-activation of the next layer matches the dropout-disabled forward pass,
and inference without dropout needs no rescaling.

Two classification losses are provided:

* :class:`CrossEntropyLoss` with optional per-class weights
  ``loss = -w[y] * ln(p[y])``
* :class:`FocalLoss` ``loss = -alpha * (1 - p_t)**gamma * ln(p_t)`` where
  ``p_t`` is the probability assigned to the true class.

Losses use the natural log. Probabilities are clamped to
``[PROB_EPS, 1 - PROB_EPS]`` before any log so that a saturated prediction
cannot produce an infinite loss; the clamp also zeroes the local gradient,
keeping analytic gradients consistent with finite differences.

Training a single network is strictly sequential (the optimizer state is a
serial dependency); independent networks can be trained concurrently.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .rng import as_generator

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "softmax", "identity")

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before any log.
PROB_EPS = 1e-12

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: ``out = activation(x @ W + b)``, then optional dropout.

    ``dropout_rate`` applies to this layer's output. Softmax is only valid as
    the final layer of a network, and probability-producing final layers
    (softmax, sigmoid) must use dropout 0 so their outputs stay normalized.
    """

    input_width: int
    output_width: int
    activation: str = "relu"
    dropout_rate: float = 0.0
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ValueError("layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    l2: float = 0.0
    dropout_active: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")


@dataclass
class CrossEntropyLoss:
    """Cross-entropy with optional positive per-class weights."""

    class_weights: np.ndarray | None = None
    kind: str = field(default="cross_entropy", init=False)

    def __post_init__(self):
        if self.class_weights is not None:
            w = np.asarray(self.class_weights, dtype=np.float64)
            if w.ndim != 1 or np.any(w <= 0):
                raise ValueError("class_weights must be a 1-D vector of positive reals")
            self.class_weights = w


@dataclass
class FocalLoss:
    alpha: float = 4.0
    gamma: float = 2.0
    kind: str = field(default="focal", init=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


Loss = "CrossEntropyLoss | FocalLoss"


@dataclass
class Gradients:
    """Parameter-shaped loss gradients, one (dW, db) pair per layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class _LayerCache:
    x: np.ndarray            # layer input
    z: np.ndarray            # pre-activation
    a: np.ndarray            # post-activation (before dropout)
    mask: np.ndarray | None  # scaled dropout mask (0 or 1/keep), or None


class Network:
    """A dense feedforward network with Adam optimizer state.

    Weights are initialized from ``Normal(0, sqrt(2 / input_width))`` and
    biases to zero, all drawn from the stream seeded by ``rng_seed``.
    """

    def __init__(self, layers, weights, biases, rng_seed=0):
        layers = list(layers)
        if not layers:
            raise ValueError("a network needs at least one layer")
        for prev, cur in zip(layers, layers[1:]):
            if prev.output_width != cur.input_width:
                raise ShapeError(
                    f"layer widths do not chain: {prev.output_width} -> {cur.input_width}"
                )
        for i, spec in enumerate(layers):
            if spec.activation == "softmax" and i != len(layers) - 1:
                raise ValueError("softmax is only permitted as the final layer")
        final = layers[-1]
        if final.activation in ("softmax", "sigmoid") and final.dropout_rate != 0.0:
            raise ValueError(
                "a probability-producing final layer must use dropout_rate 0"
            )
        for spec, W, b in zip(layers, weights, biases):
            if W.shape != (spec.input_width, spec.output_width) or b.shape != (spec.output_width,):
                raise ShapeError("parameter shapes do not match the layer specs")
        self.layers = layers
        self.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.rng_seed = rng_seed
        self.reset_optimizer()

    @classmethod
    def init(cls, layers, seed: int = 0) -> "Network":
        """Build a network with freshly initialized parameters."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for spec in layers:
            std = np.sqrt(2.0 / spec.input_width)
            weights.append(rng.normal(0.0, std, size=(spec.input_width, spec.output_width)))
            biases.append(np.zeros(spec.output_width))
        return cls(layers, weights, biases, rng_seed=seed)

    @property
    def input_width(self) -> int:
        return self.layers[0].input_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].output_width

    @property
    def class_count(self) -> int:
        """Number of classes the network predicts (a 1-unit sigmoid head is binary)."""
        if self.layers[-1].activation == "sigmoid" and self.output_width == 1:
            return 2
        return self.output_width

    def reset_optimizer(self) -> None:
        self.step = 0
        self.m_w = [np.zeros_like(W) for W in self.weights]
        self.v_w = [np.zeros_like(W) for W in self.weights]
        self.m_b = [np.zeros_like(b) for b in self.biases]
        self.v_b = [np.zeros_like(b) for b in self.biases]

    def copy(self) -> "Network":
        dup = Network(
            self.layers,
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            rng_seed=self.rng_seed,
        )
        dup.step = self.step
        dup.m_w = [m.copy() for m in self.m_w]
        dup.v_w = [v.copy() for v in self.v_w]
        dup.m_b = [m.copy() for m in self.m_b]
        dup.v_b = [v.copy() for v in self.v_b]
        return dup


def with_dropout_rate(net: Network, rate: float) -> Network:
    """Copy ``net`` with every non-final layer's dropout rate set to ``rate``."""
    specs = [
        dataclasses.replace(spec, dropout_rate=rate) if i < len(net.layers) - 1 else spec
        for i, spec in enumerate(net.layers)
    ]
    dup = net.copy()
    dup.layers = specs
    return dup


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _activate(spec: LayerSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    if spec.activation == "leaky_relu":
        return np.where(z >= 0, z, spec.leaky_slope * z)
    if spec.activation == "sigmoid":
        return _sigmoid(z)
    if spec.activation == "softmax":
        return _softmax(z)
    return z


def _activation_backward(spec: LayerSpec, cache: _LayerCache, grad_a: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. the activation output back to the pre-activation."""
    if spec.activation == "softmax":
        # Row-wise Jacobian product: dz = a * (g - sum(g * a)).
        inner = np.sum(grad_a * cache.a, axis=1, keepdims=True)
        return cache.a * (grad_a - inner)
    if spec.activation == "relu":
        return grad_a * (cache.z > 0)
    if spec.activation == "leaky_relu":
        return grad_a * np.where(cache.z >= 0, 1.0, spec.leaky_slope)
    if spec.activation == "sigmoid":
        return grad_a * cache.a * (1.0 - cache.a)
    return grad_a


def forward(net: Network, batch: np.ndarray, dropout_active: bool = False, rng=None):
    """Run the network on a batch, returning ``(output, caches)``.

    ``batch`` is ``(n, input_width)``. When ``dropout_active`` and a layer has
    a nonzero rate, a fresh mask is drawn from ``rng`` and retained units are
    scaled by ``1/(1-rate)``. Layers with rate 0 never consume randomness, so
    a zero-dropout network gives bit-identical outputs with dropout on or off.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != net.input_width:
        raise ShapeError(
            f"batch has {batch.shape[1]} features but the network expects {net.input_width}"
        )
    caches = []
    out = batch
    gen = None
    for spec, W, b in zip(net.layers, net.weights, net.biases):
        x = out
        z = x @ W + b
        a = _activate(spec, z)
        mask = None
        if dropout_active and spec.dropout_rate > 0.0:
            if gen is None:
                if rng is None:
                    raise ValueError("an rng is required when dropout is active")
                gen = as_generator(rng)
            keep = 1.0 - spec.dropout_rate
            mask = (gen.random(a.shape) < keep) / keep
            out = a * mask
        else:
            out = a
        caches.append(_LayerCache(x=x, z=z, a=a, mask=mask))
    if not np.all(np.isfinite(out)):
        raise NumericError("forward pass produced non-finite values")
    return out, caches


def class_probabilities(net: Network, batch: np.ndarray, dropout_active: bool = False, rng=None) -> np.ndarray:
    """Forward pass returning one probability row per sample.

    A single-unit sigmoid head is expanded to the two-class vector
    ``[1 - p, p]``; a softmax head is returned as-is.
    """
    out, _ = forward(net, batch, dropout_active=dropout_active, rng=rng)
    if net.layers[-1].activation == "sigmoid" and out.shape[1] == 1:
        return np.hstack([1.0 - out, out])
    return out


def predict_proba(net: Network, X: np.ndarray) -> np.ndarray:
    """Deterministic (dropout-disabled) class probabilities."""
    return class_probabilities(net, X, dropout_active=False)


def predict_labels(net: Network, X: np.ndarray) -> np.ndarray:
    """Deterministic hard labels; ties break toward the lowest class index."""
    return np.argmax(predict_proba(net, X), axis=1)


def _check_labels(y: np.ndarray, n_rows: int, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_rows:
        raise ShapeError("labels must be a vector with one entry per batch row")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == np.floor(y)):
            raise ValueError("labels must be integers")
        y = y.astype(np.int64)
    if n_rows and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return y.astype(np.int64)


def _per_sample_loss_and_grad(loss, pt_raw: np.ndarray, weights_per_sample: np.ndarray):
    """Loss and d(loss)/d(p_t) for the true-class probabilities ``pt_raw``.

    The clamp to ``[PROB_EPS, 1 - PROB_EPS]`` makes the loss locally constant
    outside that band, so the gradient is zeroed there.
    """
    pc = np.clip(pt_raw, PROB_EPS, 1.0 - PROB_EPS)
    active = (pt_raw > PROB_EPS) & (pt_raw < 1.0 - PROB_EPS)
    log_pc = np.log(pc)
    if isinstance(loss, CrossEntropyLoss):
        losses = -weights_per_sample * log_pc
        dpt = np.where(active, -weights_per_sample / pc, 0.0)
    elif isinstance(loss, FocalLoss):
        one_minus = 1.0 - pc
        mod = one_minus**loss.gamma
        losses = -loss.alpha * mod * log_pc
        dpt = loss.alpha * (loss.gamma * one_minus ** (loss.gamma - 1.0) * log_pc - mod / pc)
        dpt = np.where(active, dpt, 0.0)
    else:
        raise TypeError(f"unknown loss {loss!r}")
    return losses, dpt


def loss_and_grad(net: Network, batch: np.ndarray, labels: np.ndarray, loss,
                  l2: float = 0.0, dropout_active: bool = False, rng=None):
    """Mean loss (plus ``l2/2 * sum(W**2)``) and its parameter gradients.

    Gradients are backpropagated through the exact forward graph, including
    the dropout masks that were drawn for this call.
    """
    out, caches = forward(net, batch, dropout_active=dropout_active, rng=rng)
    n = out.shape[0]
    if n == 0:
        raise ValueError("cannot compute a loss on an empty batch")
    final = net.layers[-1]
    if final.activation == "softmax":
        n_classes = out.shape[1]
        y = _check_labels(labels, n, n_classes)
        pt_raw = out[np.arange(n), y]
    elif final.activation == "sigmoid" and out.shape[1] == 1:
        n_classes = 2
        y = _check_labels(labels, n, 2)
        p1 = out[:, 0]
        pt_raw = np.where(y == 1, p1, 1.0 - p1)
    else:
        raise ValueError(
            "classification losses need a softmax final layer or a single sigmoid output"
        )
    if isinstance(loss, CrossEntropyLoss) and loss.class_weights is not None:
        if loss.class_weights.shape[0] != n_classes:
            raise ShapeError(
                f"class_weights has length {loss.class_weights.shape[0]} "
                f"but the network predicts {n_classes} classes"
            )
        w = loss.class_weights[y]
    else:
        w = np.ones(n)
    losses, dpt = _per_sample_loss_and_grad(loss, pt_raw, w)
    loss_value = float(losses.mean())
    if l2:
        loss_value += 0.5 * l2 * sum(float((W**2).sum()) for W in net.weights)

    # Gradient of the mean loss w.r.t. the network output.
    grad_out = np.zeros_like(out)
    if final.activation == "softmax":
        grad_out[np.arange(n), y] = dpt / n
    else:
        grad_out[:, 0] = dpt * np.where(y == 1, 1.0, -1.0) / n

    grads_w: list = [None] * len(net.layers)
    grads_b: list = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        cache = caches[i]
        if cache.mask is not None:
            grad_out = grad_out * cache.mask
        grad_z = _activation_backward(net.layers[i], cache, grad_out)
        grads_w[i] = cache.x.T @ grad_z + l2 * net.weights[i]
        grads_b[i] = grad_z.sum(axis=0)
        grad_out = grad_z @ net.weights[i].T
    if not np.isfinite(loss_value) or not all(
        np.all(np.isfinite(g)) for g in grads_w + grads_b
    ):
        raise NumericError("loss or gradients are non-finite")
    return loss_value, Gradients(weights=grads_w, biases=grads_b)


def adam_step(net: Network, grads: Gradients, learning_rate: float,
              beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
              epsilon: float = ADAM_EPSILON) -> Network:
    """Apply one bias-corrected Adam update in place and return the network."""
    for g, p in zip(grads.weights + grads.biases, net.weights + net.biases):
        if g.shape != p.shape:
            raise ShapeError("gradient shapes do not match parameter shapes")
    net.step += 1
    t = net.step
    scale_m = 1.0 - beta1**t
    scale_v = 1.0 - beta2**t
    for params, grad_list, ms, vs in (
        (net.weights, grads.weights, net.m_w, net.v_w),
        (net.biases, grads.biases, net.m_b, net.v_b),
    ):
        for i, g in enumerate(grad_list):
            ms[i] = beta1 * ms[i] + (1.0 - beta1) * g
            vs[i] = beta2 * vs[i] + (1.0 - beta2) * g * g
            m_hat = ms[i] / scale_m
            v_hat = vs[i] / scale_v
            params[i] -= learning_rate * m_hat / (np.sqrt(v_hat) + epsilon)
    return net


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float


def train(net: Network, X: np.ndarray, y: np.ndarray, cfg: TrainConfig, loss):
    """Train a copy of ``net`` by mini-batch Adam; returns ``(trained, history)``.

    Shuffling and dropout masks are drawn from the stream seeded by
    ``cfg.seed``, so identical inputs give bit-identical trained weights.
    The recorded accuracy is measured on the full training set with dropout
    disabled after each epoch; the loss is the mean over that epoch's batches.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data must be a non-empty 2-D array")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise ShapeError("X and y disagree on the number of samples")
    net = net.copy()
    rng = np.random.default_rng(cfg.seed)
    n = X.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            value, grads = loss_and_grad(
                net, X[idx], y[idx], loss, l2=cfg.l2,
                dropout_active=cfg.dropout_active, rng=rng,
            )
            adam_step(net, grads, cfg.learning_rate)
            batch_losses.append(value)
        accuracy = float(np.mean(predict_labels(net, X) == y))
        history.append(EpochStats(epoch=epoch, loss=float(np.mean(batch_losses)), accuracy=accuracy))
    return net, history
