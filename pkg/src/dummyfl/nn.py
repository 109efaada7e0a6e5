"""Small tanh MLP with handwritten forward/backward passes.

Parameter layout (the ``vec(theta)`` used by every distance computation):
layers are stored in order, input to output; for each layer the weight
matrix comes first, row-major with shape ``(in_dim, out_dim)``, followed by
the bias vector of length ``out_dim``. A layer computes ``z = x @ W + b``.
Hidden layers apply ``tanh``; the output layer is affine.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InputError

DEFAULT_HIDDEN = (64, 32)


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if len(self.hidden_dims) < 1:
            raise ConfigurationError("an MLP needs at least one hidden layer")
        if min(self.input_dim, self.num_classes, *self.hidden_dims) < 1:
            raise ConfigurationError(f"all layer widths must be >= 1, got {self}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def projection_dim(self) -> int:
        """Width of the features fed into the final affine layer."""
        return self.hidden_dims[-1]

    @property
    def num_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)


@dataclass(frozen=True, eq=False)
class ModelParams:
    arch: MlpArchitecture
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.ndim != 1 or theta.size != self.arch.num_params:
            raise ConfigurationError(
                f"theta has {theta.size} entries, architecture needs {self.arch.num_params}"
            )
        object.__setattr__(self, "theta", theta)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return unflatten(self.arch, self.theta)

    def with_theta(self, theta: np.ndarray) -> "ModelParams":
        return ModelParams(self.arch, theta)


@dataclass(frozen=True, eq=False)
class LabeledBatch:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if inputs.ndim != 2 or labels.ndim != 1 or inputs.shape[0] != labels.shape[0]:
            raise ConfigurationError(
                f"inputs {inputs.shape} and labels {labels.shape} do not line up"
            )
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def subset(self, index) -> "LabeledBatch":
        return LabeledBatch(self.inputs[index], self.labels[index])


def unflatten(arch: MlpArchitecture, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into ``(W, b)`` views following the module layout."""
    out = []
    pos = 0
    for i, o in arch.layer_dims:
        w = theta[pos:pos + i * o].reshape(i, o)
        pos += i * o
        b = theta[pos:pos + o]
        pos += o
        out.append((w, b))
    return out


def flatten(layers: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    return np.concatenate([np.concatenate([np.ravel(w), np.ravel(b)]) for w, b in layers])


def init_params(arch: MlpArchitecture, rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights and biases, drawn layer by layer in layout order."""
    layers = []
    for i, o in arch.layer_dims:
        limit = np.sqrt(6.0 / (i + o))
        layers.append((rng.uniform(-limit, limit, size=(i, o)), rng.uniform(-limit, limit, size=o)))
    return ModelParams(arch, flatten(layers))


def _check_inputs(arch: MlpArchitecture, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != arch.input_dim:
        raise ConfigurationError(
            f"expected inputs with {arch.input_dim} columns, got shape {inputs.shape}"
        )
    return inputs


def forward(model: ModelParams, inputs: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Return logits and the per-layer ``(pre, post)`` activation cache.

    ``cache[0]`` is ``(None, inputs)``; entry ``k`` holds layer ``k``'s
    pre-activation and its output (tanh for hidden layers, identity for the
    output layer).
    """
    a = _check_inputs(model.arch, inputs)
    layers = model.layers()
    cache: list = [(None, a)]
    for k, (w, b) in enumerate(layers):
        z = a @ w + b
        a = np.tanh(z) if k < len(layers) - 1 else z
        cache.append((z, a))
    return a, cache


def project(model: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Features entering the last fully connected layer, shape ``(rows, O)``."""
    a = _check_inputs(model.arch, inputs)
    for w, b in model.layers()[:-1]:
        a = np.tanh(a @ w + b)
    return a


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_labels(labels, rows: int, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (rows,):
        raise ConfigurationError(f"{rows} rows of logits but labels have shape {labels.shape}")
    if rows and (labels.min() < 0 or labels.max() >= num_classes):
        raise InputError(f"labels must lie in [0, {num_classes})")
    return labels


def cross_entropy(logits: np.ndarray, labels) -> float:
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(labels, logits.shape[0], logits.shape[1])
    logp = log_softmax(logits)
    return float(-logp[np.arange(labels.size), labels].mean())


def loss(model: ModelParams, batch: LabeledBatch) -> float:
    logits, _ = forward(model, batch.inputs)
    return cross_entropy(logits, batch.labels)


def accuracy(model: ModelParams, batch: LabeledBatch) -> float:
    logits, _ = forward(model, batch.inputs)
    return float(np.mean(np.argmax(logits, axis=1) == batch.labels))


def backward(model: ModelParams, batch: LabeledBatch) -> np.ndarray:
    """Gradient of the mean cross-entropy over ``batch``, in theta layout."""
    logits, cache = forward(model, batch.inputs)
    n = logits.shape[0]
    labels = _check_labels(batch.labels, n, model.arch.num_classes)
    delta = np.exp(log_softmax(logits))
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    layers = model.layers()
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        a_prev = cache[k][1]
        grads[k] = (a_prev.T @ delta, delta.sum(axis=0))
        if k:
            delta = (delta @ w.T) * (1.0 - a_prev ** 2)
    return flatten(grads)


def sgd_step(model: ModelParams, gradient: np.ndarray, lr: float) -> ModelParams:
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != model.theta.shape:
        raise ConfigurationError(
            f"gradient length {gradient.size} != parameter count {model.theta.size}"
        )
    if lr < 0:
        raise ConfigurationError(f"learning rate must be non-negative, got {lr}")
    return model.with_theta(model.theta - lr * gradient)
