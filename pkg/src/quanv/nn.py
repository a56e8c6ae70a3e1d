"""Dense feedforward classifier with sigmoid output, BCE loss and Adam.

Inputs are row vectors; a batch is a ``(B, in_dim)`` array.  Weight matrices
are stored ``(out_dim, in_dim)`` so a layer computes ``x @ W.T + b``.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import atomic_write_bytes
from .errors import ConfigError, FormatError, ShapeError
from .rng import SplitMix64

ACTIVATIONS = ("Identity", "ReLU", "Sigmoid")
P_CLAMP = 1e-7

CHECKPOINT_MAGIC = b"QNVM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "ReLU"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(f"layer dims must be positive, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ConfigError("Adam epsilon must be positive")


@dataclass
class DenseModel:
    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    adam_m: list[np.ndarray] = field(default_factory=list)
    adam_v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def params(self) -> list[np.ndarray]:
        """Parameters in checkpoint order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "DenseModel":
        return DenseModel(
            list(self.layers),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            [m.copy() for m in self.adam_m],
            [v.copy() for v in self.adam_v],
            self.step,
        )


def classifier_specs(in_dim: int = 784, hidden: int = 128) -> list[LayerSpec]:
    """Flatten -> Dense(hidden, ReLU) -> Dense(1, Sigmoid), shared by both models."""
    return [LayerSpec(in_dim, hidden, "ReLU"), LayerSpec(hidden, 1, "Sigmoid")]


def init_model(specs: Sequence[LayerSpec], seed: int) -> DenseModel:
    """Glorot-uniform weights (limit sqrt(6 / (in + out))), zero biases, fresh Adam state."""
    specs = list(specs)
    if not specs:
        raise ConfigError("a model needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ConfigError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
    rng = SplitMix64(seed)
    weights, biases = [], []
    for i, spec in enumerate(specs):
        limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
        u = rng.split(i).uniform(-limit, limit, spec.out_dim * spec.in_dim)
        weights.append(u.reshape(spec.out_dim, spec.in_dim))
        biases.append(np.zeros(spec.out_dim))
    model = DenseModel(specs, weights, biases)
    model.adam_m = [np.zeros_like(p) for p in model.params()]
    model.adam_v = [np.zeros_like(p) for p in model.params()]
    return model


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "ReLU":
        return np.maximum(z, 0.0)
    if kind == "Sigmoid":
        return _sigmoid(z)
    return z


def forward(model: DenseModel, x: np.ndarray) -> tuple[np.ndarray | float, list[np.ndarray]]:
    """Run the network on one input vector or a ``(B, in_dim)`` batch.

    Returns the clamped output probability (a float for a single vector) and
    the per-layer activations ``[input, a_1, ..., a_L]`` for ``backward``;
    the last activation is the unclamped output.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.ndim != 2 or a.shape[1] != model.layers[0].in_dim:
        raise ShapeError(f"expected input length {model.layers[0].in_dim}, got shape {x.shape}")
    acts = [a]
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        a = _activate(a @ w.T + b, spec.activation)
        acts.append(a)
    p = np.clip(a[:, 0], P_CLAMP, 1.0 - P_CLAMP)
    return (float(p[0]) if single else p), acts


def bce_loss(prediction, label) -> float:
    """Mean binary cross-entropy over a single prediction or a batch."""
    p = np.clip(np.asarray(prediction, dtype=np.float64), P_CLAMP, 1.0 - P_CLAMP)
    y = np.asarray(label, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def backward(model: DenseModel, activations: list[np.ndarray], label) -> list[np.ndarray]:
    """Gradients of the mean BCE with respect to ``model.params()`` order.

    ``activations`` must come from ``forward`` on the same parameters; the
    output delta of sigmoid + BCE is ``p - y``.
    """
    if model.layers[-1].activation != "Sigmoid" or model.layers[-1].out_dim != 1:
        raise ConfigError("backward expects a single sigmoid output unit")
    if len(activations) != len(model.layers) + 1:
        raise ConfigError("activations do not match the model depth")
    y = np.atleast_1d(np.asarray(label, dtype=np.float64))
    out = activations[-1]
    if out.shape[0] != y.shape[0]:
        raise ShapeError(f"{out.shape[0]} outputs but {y.shape[0]} labels")
    delta = (out - y[:, None]) / len(y)
    grads: list[np.ndarray] = [None] * (2 * len(model.layers))  # type: ignore[list-item]
    for k in range(len(model.layers) - 1, -1, -1):
        a_prev = activations[k]
        grads[2 * k] = delta.T @ a_prev
        grads[2 * k + 1] = delta.sum(axis=0)
        if k == 0:
            break
        delta = delta @ model.weights[k]
        kind = model.layers[k - 1].activation
        if kind == "ReLU":
            delta = delta * (a_prev > 0)
        elif kind == "Sigmoid":
            delta = delta * a_prev * (1.0 - a_prev)
    return grads


def adam_step(model: DenseModel, grads: Sequence[np.ndarray], config: AdamConfig = AdamConfig()) -> DenseModel:
    """One bias-corrected Adam update, in place; returns ``model``."""
    params = model.params()
    if len(grads) != len(params):
        raise ShapeError(f"expected {len(params)} gradient arrays, got {len(grads)}")
    for p, g in zip(params, grads):
        if np.shape(g) != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} does not match parameter {p.shape}")
    model.step += 1
    t = model.step
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, model.adam_m, model.adam_v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return model


def predict_batch(model: DenseModel, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.size == 0:
        return np.zeros(0)
    p, _ = forward(model, inputs.reshape(len(inputs), -1))
    return p


def classify(probabilities: np.ndarray) -> np.ndarray:
    """Class 1 iff p >= 0.5 (ties go to the positive class)."""
    return (np.asarray(probabilities) >= 0.5).astype(np.int64)


# -- checkpoints --------------------------------------------------------------
#
#   b"QNVM" u32 version u32 n_layers u64 step
#   f64 lr f64 beta1 f64 beta2 f64 epsilon            (Adam config used)
#   n_layers * (u32 in_dim, u32 out_dim, u32 activation index)
#   f64[] params, then Adam m, then Adam v; each as W0 (row-major), b0, W1, b1, ...
#
# all little-endian.

_CKPT_HEAD = struct.Struct("<4sIIQ4d")
_LAYER = struct.Struct("<III")


def save_checkpoint(model: DenseModel, path: str | os.PathLike, config: AdamConfig = AdamConfig()) -> None:
    parts = [
        _CKPT_HEAD.pack(
            CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(model.layers), model.step,
            config.learning_rate, config.beta1, config.beta2, config.epsilon,
        )
    ]
    for s in model.layers:
        parts.append(_LAYER.pack(s.in_dim, s.out_dim, ACTIVATIONS.index(s.activation)))
    for arr in model.params() + model.adam_m + model.adam_v:
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def load_checkpoint(path: str | os.PathLike) -> tuple[DenseModel, AdamConfig]:
    raw = Path(path).read_bytes()
    if len(raw) < _CKPT_HEAD.size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, n_layers, step, lr, b1, b2, eps = _CKPT_HEAD.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    off = _CKPT_HEAD.size
    specs = []
    for _ in range(n_layers):
        if len(raw) < off + _LAYER.size:
            raise FormatError(f"{path}: truncated layer table at offset {off}")
        i, o, a = _LAYER.unpack_from(raw, off)
        if a >= len(ACTIVATIONS):
            raise FormatError(f"{path}: unknown activation index {a} at offset {off + 8}")
        specs.append(LayerSpec(i, o, ACTIVATIONS[a]))
        off += _LAYER.size
    shapes = []
    for s in specs:
        shapes += [(s.out_dim, s.in_dim), (s.out_dim,)]
    total = 3 * sum(int(np.prod(sh)) for sh in shapes)
    if len(raw) != off + 8 * total:
        raise FormatError(f"{path}: expected {off + 8 * total} bytes, got {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f8", offset=off).astype(np.float64)
    arrays, pos = [], 0
    for _ in range(3):
        for sh in shapes:
            k = int(np.prod(sh))
            arrays.append(flat[pos:pos + k].reshape(sh).copy())
            pos += k
    n = len(shapes)
    params, m, v = arrays[:n], arrays[n:2 * n], arrays[2 * n:]
    model = DenseModel(specs, params[0::2], params[1::2], m, v, step)
    return model, AdamConfig(lr, b1, b2, eps)
