"""Fully connected ReLU network with hand-written backpropagation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ordino.errors import DimensionError

HIDDEN_SIZES = (100, 100, 100)
CHECKPOINT_FORMAT = "ordino-mlp"
CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    """Weights ``W[l]`` of shape ``(fan_in, fan_out)`` and biases ``b[l]`` of shape ``(fan_out,)``.

    Hidden layers use ReLU, the output layer is linear.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list[np.ndarray]:
        """Flat list of parameter arrays (weights first, then biases)."""
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "layers": [
                {"shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpParams":
        weights, biases = [], []
        for layer in d["layers"]:
            shape = tuple(layer["shape"])
            weights.append(np.asarray(layer["weight"], dtype=float).reshape(shape))
            biases.append(np.asarray(layer["bias"], dtype=float))
        return cls(weights, biases)


@dataclass
class GradientBuffer:
    """Gradients with the same layout as :class:`MlpParams`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_grad: np.ndarray | None = field(default=None, repr=False)

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "GradientBuffer":
        return cls([np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(b) for b in params.biases])


def layer_sizes(d: int, output_dim: int, hidden=HIDDEN_SIZES) -> tuple[int, ...]:
    return (d, *hidden, output_dim)


def init(seed, sizes) -> MlpParams:
    """Glorot-uniform weights, zero biases; reproducible from ``seed``."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _forward_cache(params: MlpParams, X: np.ndarray) -> list[np.ndarray]:
    acts = [X]
    h = X
    last = len(params.weights) - 1
    for i, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ W + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != params.weights[0].shape[0]:
        raise DimensionError(
            f"input has dimension {X.shape[1]}, network expects {params.weights[0].shape[0]}")
    return X, single


def forward(params: MlpParams, x) -> np.ndarray:
    """Network output for one feature vector or a batch of rows."""
    X, single = _as_batch(params, x)
    out = _forward_cache(params, X)[-1]
    return out[0] if single else out


def backward(params: MlpParams, x, upstream, cache=None) -> GradientBuffer:
    """Reverse-mode gradients of ``sum(upstream * forward(params, x))``.

    ReLU'(0) is taken as 0.  ``cache`` may carry the activations from a
    previous forward pass on the same input.
    """
    X, single = _as_batch(params, x)
    G = np.atleast_2d(np.asarray(upstream, dtype=float))
    if G.shape != (X.shape[0], params.weights[-1].shape[1]):
        raise DimensionError(f"upstream gradient has shape {G.shape}")
    acts = cache if cache is not None else _forward_cache(params, X)
    L = len(params.weights)
    dW = [None] * L
    db = [None] * L
    for i in range(L - 1, -1, -1):
        dW[i] = acts[i].T @ G
        db[i] = G.sum(axis=0)
        G = G @ params.weights[i].T
        if i > 0:
            G = G * (acts[i] > 0)
    return GradientBuffer(dW, db, input_grad=G[0] if single else G)


def save_params(params: MlpParams, path, extra: dict | None = None) -> None:
    doc = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, **params.to_dict()}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_params(path) -> tuple[MlpParams, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a network checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    return MlpParams.from_dict(doc), doc
