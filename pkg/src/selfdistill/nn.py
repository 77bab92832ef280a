"""Dense ReLU networks with hand-written backpropagation and SGD.

Everything is float64. Parameters are plain numpy arrays so models can be
copied, hashed and checkpointed without any framework.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

CHECKPOINT_MAGIC = b"DFCK1"


@dataclass
class Batch:
    """A minibatch: features, integer labels and positions in the full set."""

    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        m = self.features.shape[0]
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if m < 1 or self.labels.shape != (m,) or self.indices.shape != (m,):
            raise ValueError(
                f"batch fields disagree: features {self.features.shape}, "
                f"labels {self.labels.shape}, indices {self.indices.shape}"
            )

    def __len__(self):
        return self.features.shape[0]

    def take(self, rows) -> "Batch":
        rows = np.asarray(rows)
        return Batch(self.features[rows], self.labels[rows], self.indices[rows])


@dataclass
class MlpModel:
    layer_dims: tuple
    weights: list
    biases: list

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list:
        """Flat list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            tuple(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for p in self.parameters():
            h.update(np.ascontiguousarray(p).tobytes())
        return h.hexdigest()


@dataclass
class Gradients:
    weights: list
    biases: list

    def parameters(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class OptimizerState:
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    velocity: list = field(default_factory=list)
    schedule: tuple = ()

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for ``epoch`` under the step schedule."""
        lr = self.learning_rate
        for start, mult in self.schedule:
            if epoch >= start:
                lr = self.learning_rate * mult
        return lr


def step_schedule(epochs: int, milestones=(0.5, 0.75), factor: float = 0.1) -> tuple:
    """(epoch, multiplier) pairs dropping the rate by ``factor`` at each milestone."""
    return tuple(
        (int(round(frac * epochs)), factor ** (i + 1)) for i, frac in enumerate(milestones)
    )


def init_model(layer_dims: Sequence[int], seed) -> MlpModel:
    """He-initialised ReLU MLP. Biases start at exactly zero.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, e.g. an
    int or a tuple of ints.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError(f"need at least input and output dims, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def _check_features(model: MlpModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_dims[0]:
        raise ValueError(
            f"expected features of shape (m, {model.layer_dims[0]}), got {x.shape}"
        )
    return x


def _forward_cache(model: MlpModel, x: np.ndarray) -> list:
    # activations[i] is the input to layer i; the last entry holds the logits
    activations = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
        activations.append(h)
    return activations


def forward(model: MlpModel, features, return_cache: bool = False):
    """Logits of shape (m, k).

    With ``return_cache`` also returns the layer activations, which
    :func:`backward` accepts to skip recomputing the forward pass.
    """
    if isinstance(features, Batch):
        features = features.features
    acts = _forward_cache(model, _check_features(model, features))
    if return_cache:
        return acts[-1], acts
    return acts[-1]


def backward(model: MlpModel, features, logit_gradient, cache=None) -> Gradients:
    """Parameter gradients given the loss gradient at the logits.

    The loss is whatever scalar ``logit_gradient`` is the gradient of; the
    result is linear in ``logit_gradient``.
    """
    if isinstance(features, Batch):
        features = features.features
    x = _check_features(model, features)
    delta = np.asarray(logit_gradient, dtype=np.float64)
    if delta.shape != (x.shape[0], model.n_classes):
        raise ValueError(
            f"logit gradient shape {delta.shape} does not match "
            f"({x.shape[0]}, {model.n_classes})"
        )
    acts = _forward_cache(model, x) if cache is None else cache
    n_layers = len(model.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i]) * (acts[i] > 0)
    return Gradients(gw, gb)


def sgd_step(model: MlpModel, gradients: Gradients, state: OptimizerState, lr=None):
    """One momentum-SGD update, applied in place. Returns ``(model, state)``.

    Weight decay is added to weight gradients only; biases are not decayed.
    """
    lr = state.learning_rate if lr is None else lr
    params = model.parameters()
    grads = gradients.parameters()
    if len(params) != len(grads):
        raise ValueError("gradient list does not match model parameters")
    if not state.velocity:
        state.velocity = [np.zeros_like(p) for p in params]
    for j, (p, g, v) in enumerate(zip(params, grads, state.velocity)):
        if g.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"shape mismatch at parameter {j}: {g.shape} vs {p.shape}")
        is_weight = j % 2 == 0
        if is_weight and state.weight_decay:
            g = g + state.weight_decay * p
        v *= state.momentum
        v += g
        p -= lr * v
    return model, state


def save_checkpoint(model: MlpModel, path) -> None:
    """Write the ``DFCK1`` container: magic, dims, then row-major params (LE)."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<q", len(model.layer_dims))]
    parts.append(struct.pack(f"<{len(model.layer_dims)}q", *model.layer_dims))
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> MlpModel:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a DFCK1 checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    (n_dims,) = struct.unpack_from("<q", data, pos)
    pos += 8
    if n_dims < 2:
        raise ValueError(f"{path}: corrupt layer count {n_dims}")
    dims = struct.unpack_from(f"<{n_dims}q", data, pos)
    pos += 8 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=pos)
        pos += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=pos)
        pos += 8 * fan_out
        weights.append(w.reshape(fan_out, fan_in).astype(np.float64))
        biases.append(b.astype(np.float64))
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return MlpModel(tuple(int(d) for d in dims), weights, biases)
