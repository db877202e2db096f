"""Small dense networks with manual backprop.

Everything runs on numpy float64 so that training, dropout sampling, and
weight persistence are bit-reproducible for a fixed seed. Two loss kinds are
supported: binary cross-entropy behind a sigmoid output (receptivity
classifier) and mean squared error behind a linear output (emotion
regressor). Dropout is inverted dropout: activations are scaled by
1/(1 - rate) whenever a mask is applied, so evaluation without masks needs no
rescaling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LEAKY_SLOPE = 0.01

_HIDDEN_ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "tanh")
_OUTPUT_ACTIVATIONS = ("linear", "sigmoid")
_LOSSES = ("mse", "bce")

_BCE_EPS = 1e-12


@dataclass(frozen=True)
class MlpSpec:
    """Architecture + training hyperparameters for one network.

    `layer_sizes` are the hidden-layer output dimensions; the output layer is
    always a single unit. `dropout_after` lists hidden-layer indices whose
    activations are followed by a dropout site.
    """

    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]
    output_activation: str = "linear"
    dropout_rate: float = 0.0
    dropout_after: tuple[int, ...] = ()
    loss: str = "mse"
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        acts = self.activations
        if isinstance(acts, str):
            acts = (acts,) * len(self.layer_sizes)
        object.__setattr__(self, "activations", tuple(acts))
        object.__setattr__(self, "dropout_after", tuple(int(i) for i in self.dropout_after))
        if not self.layer_sizes or any(s <= 0 for s in self.layer_sizes):
            raise ValueError(f"layer sizes must be positive, got {self.layer_sizes}")
        if len(self.activations) != len(self.layer_sizes):
            raise ValueError("need one activation per hidden layer")
        for a in self.activations:
            if a not in _HIDDEN_ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.output_activation not in _OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        if any(i < 0 or i >= len(self.layer_sizes) for i in self.dropout_after):
            raise ValueError("dropout_after indices out of range")
        if self.loss not in _LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "layer_sizes": list(self.layer_sizes),
                "activations": list(self.activations),
                "output_activation": self.output_activation,
                "dropout_rate": self.dropout_rate,
                "dropout_after": list(self.dropout_after),
                "loss": self.loss,
                "learning_rate": self.learning_rate,
                "epochs": self.epochs,
                "batch_size": self.batch_size,
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MlpSpec":
        d = json.loads(text)
        return cls(
            layer_sizes=tuple(d["layer_sizes"]),
            activations=tuple(d["activations"]),
            output_activation=d["output_activation"],
            dropout_rate=d["dropout_rate"],
            dropout_after=tuple(d["dropout_after"]),
            loss=d["loss"],
            learning_rate=d["learning_rate"],
            epochs=d["epochs"],
            batch_size=d["batch_size"],
            seed=d["seed"],
        )


@dataclass
class MlpParams:
    """Weight matrices and bias vectors, one pair per layer (hidden + output)."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.weights + self.biases)


def init_params(spec: MlpSpec, n_features: int, rng: np.random.Generator) -> MlpParams:
    """He-style fan-in-scaled uniform init; biases start at zero."""
    sizes = [int(n_features)] + list(spec.layer_sizes) + [1]
    params = MlpParams()
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        params.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.biases.append(np.zeros(fan_out))
    return params


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0.0, z, LEAKY_SLOPE * z)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    raise ValueError(name)


def _activate_grad(name, z, a):
    # Derivative wrt z, expressed through z or the cached activation a.
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "leaky_relu":
        return np.where(z > 0.0, 1.0, LEAKY_SLOPE)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(name)


def forward(spec: MlpSpec, params: MlpParams, x, dropout_masks=None):
    """Forward pass; returns the output column squeezed to shape (n,).

    `dropout_masks` is a dict {hidden-layer index: mask} of 0/1 arrays
    broadcastable to that layer's activation; masked activations are scaled by
    1/(1 - rate). None means dropout disabled (plain evaluation).
    """
    a = np.atleast_2d(np.asarray(x, dtype=float))
    keep = 1.0 - spec.dropout_rate
    for i, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        a = _activate(spec.activations[i], a @ w + b)
        if dropout_masks is not None and i in dropout_masks:
            a = a * dropout_masks[i] / keep
    z = a @ params.weights[-1] + params.biases[-1]
    return _activate(spec.output_activation, z)[:, 0]


def loss_value(spec: MlpSpec, y_pred, y_true) -> float:
    y_pred = np.asarray(y_pred, dtype=float)
    y_true = np.asarray(y_true, dtype=float)
    if spec.loss == "mse":
        return float(np.mean((y_pred - y_true) ** 2))
    p = np.clip(y_pred, _BCE_EPS, 1.0 - _BCE_EPS)
    return float(-np.mean(y_true * np.log(p) + (1.0 - y_true) * np.log1p(-p)))


def _forward_cached(spec, params, x, dropout_masks):
    zs, acts = [], [np.atleast_2d(np.asarray(x, dtype=float))]
    keep = 1.0 - spec.dropout_rate
    a = acts[0]
    for i, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        z = a @ w + b
        a = _activate(spec.activations[i], z)
        if dropout_masks is not None and i in dropout_masks:
            a = a * dropout_masks[i] / keep
        zs.append(z)
        acts.append(a)
    z = a @ params.weights[-1] + params.biases[-1]
    zs.append(z)
    acts.append(_activate(spec.output_activation, z))
    return zs, acts


def gradients(spec: MlpSpec, params: MlpParams, x, y, dropout_masks=None):
    """Analytic gradient of the mean loss wrt every weight and bias."""
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    zs, acts = _forward_cached(spec, params, x, dropout_masks)
    n = y.shape[0]
    out = acts[-1]

    if spec.loss == "bce" and spec.output_activation == "sigmoid":
        delta = (out - y) / n  # combined sigmoid + BCE shortcut
    elif spec.loss == "mse":
        dloss = 2.0 * (out - y) / n
        delta = dloss * _activate_grad(spec.output_activation, zs[-1], out)
    else:  # bce behind a non-sigmoid output, kept for gradient checks
        p = np.clip(out, _BCE_EPS, 1.0 - _BCE_EPS)
        dloss = (p - y) / (p * (1.0 - p)) / n
        delta = dloss * _activate_grad(spec.output_activation, zs[-1], out)

    keep = 1.0 - spec.dropout_rate
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i].T
            if dropout_masks is not None and (i - 1) in dropout_masks:
                delta = delta * dropout_masks[i - 1] / keep
            delta = delta * _activate_grad(spec.activations[i - 1], zs[i - 1], acts[i])
    return grads_w, grads_b


def numeric_gradients(spec: MlpSpec, params: MlpParams, x, y, eps=1e-5, dropout_masks=None):
    """Central finite differences over every parameter; the gradient oracle."""
    grads_w, grads_b = [], []
    for group, grads in ((params.weights, grads_w), (params.biases, grads_b)):
        for arr in group:
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + eps
                hi = loss_value(spec, forward(spec, params, x, dropout_masks), y)
                arr[idx] = orig - eps
                lo = loss_value(spec, forward(spec, params, x, dropout_masks), y)
                arr[idx] = orig
                g[idx] = (hi - lo) / (2.0 * eps)
                it.iternext()
            grads.append(g)
    return grads_w, grads_b


def _training_masks(spec, rng, n_rows):
    if spec.dropout_rate == 0.0 or not spec.dropout_after:
        return None
    masks = {}
    for i in sorted(spec.dropout_after):
        masks[i] = (rng.random((n_rows, spec.layer_sizes[i])) >= spec.dropout_rate).astype(float)
    return masks


def train(spec: MlpSpec, x, y):
    """Mini-batch gradient descent; returns (params, per-epoch loss history).

    The loss history holds the full-data loss evaluated with dropout disabled,
    entry 0 before any update and one entry after each epoch. All randomness
    (init, shuffling, dropout masks) flows from a single generator seeded with
    spec.seed, so identical calls give bit-identical weights.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature rows and targets disagree in length")
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty training set")

    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    params = init_params(spec, x.shape[1], rng)
    history = [loss_value(spec, forward(spec, params, x), y)]
    batch = max(1, min(spec.batch_size, n))

    for _ in range(spec.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start : start + batch]
            masks = _training_masks(spec, rng, len(rows))
            gw, gb = gradients(spec, params, x[rows], y[rows], masks)
            for w, g in zip(params.weights, gw):
                w -= spec.learning_rate * g
            for b, g in zip(params.biases, gb):
                b -= spec.learning_rate * g
        history.append(loss_value(spec, forward(spec, params, x), y))

    if not params.all_finite():
        raise FloatingPointError("training diverged: non-finite weights")
    return params, np.asarray(history)


def mc_dropout_forward(spec: MlpSpec, params: MlpParams, x, passes: int, seed: int):
    """Mean and variance over `passes` dropout-enabled forward passes.

    Each pass samples one thinned network: per-unit masks shared across all
    input rows, drawn from a stream keyed by (seed, pass index). With a zero
    dropout rate the passes collapse to the deterministic forward value and
    the variance is exactly zero. Variance uses ddof=0, so a single pass
    reports zero variance.
    """
    if passes < 1:
        raise ValueError("passes must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if spec.dropout_rate == 0.0 or not spec.dropout_after:
        out = forward(spec, params, x)
        return out, np.zeros_like(out)

    sites = sorted(spec.dropout_after)
    keep = 1.0 - spec.dropout_rate
    # masks[i] has shape (passes, layer width): one thinned network per pass.
    masks = {i: np.empty((passes, spec.layer_sizes[i])) for i in sites}
    for p in range(passes):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(p,)))
        for i in sites:
            masks[i][p] = (rng.random(spec.layer_sizes[i]) >= spec.dropout_rate).astype(float)

    # Batched over passes: activations carry shape (passes, n_rows, width).
    a = np.broadcast_to(x, (passes,) + x.shape)
    for i, (w, b) in enumerate(zip(params.weights[:-1], params.biases[:-1])):
        a = _activate(spec.activations[i], a @ w + b)
        if i in masks:
            a = a * masks[i][:, None, :] / keep
    z = a @ params.weights[-1] + params.biases[-1]
    out = _activate(spec.output_activation, z)[:, :, 0]
    return out.mean(axis=0), out.var(axis=0)
