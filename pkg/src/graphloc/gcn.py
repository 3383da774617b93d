"""Graph convolutional place classifier, from scratch on numpy.

Layer rule: H' = relu((A + I) H W + b), i.e. sum aggregation over the
node's closed neighborhood followed by a shared linear map. Graph-level
logits come from a mean readout over node embeddings and a final linear
layer. Gradients are derived analytically (no framework); everything is
float64 and deterministic given the seed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import PARAMS_SCHEMA_VERSION
from .scene_graph import SceneGraph


class GcnNumericsError(Exception):
    """A forward pass produced a non-finite value."""


@dataclass(frozen=True)
class TrainConfig:
    layers: int = 2
    hidden: int = 64
    lr: float = 1e-3
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1:
            raise ValueError("need at least one layer and one hidden unit")
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch_size")


@dataclass
class GcnParams:
    """Learnable tensors: per-layer weights/biases plus the readout map."""

    weights: list[np.ndarray]  # layer l: (d_in, d_out)
    biases: list[np.ndarray]   # layer l: (d_out,)
    readout_w: np.ndarray      # (d_last, n_classes)
    readout_b: np.ndarray      # (n_classes,)

    @property
    def n_classes(self) -> int:
        return self.readout_w.shape[1]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "GcnParams":
        return GcnParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases],
                         self.readout_w.copy(), self.readout_b.copy())

    def flat(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases, self.readout_w, self.readout_b]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(in_dim: int, n_classes: int,
                config: TrainConfig = TrainConfig()) -> GcnParams:
    rng = np.random.default_rng(config.seed)
    dims = [in_dim] + [config.hidden] * config.layers
    weights = [glorot(rng, dims[i], dims[i + 1]) for i in range(config.layers)]
    biases = [np.zeros(dims[i + 1]) for i in range(config.layers)]
    readout_w = glorot(rng, dims[-1], n_classes)
    readout_b = np.zeros(n_classes)
    return GcnParams(weights, biases, readout_w, readout_b)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass
class _Trace:
    """Forward-pass intermediates needed by the backward pass."""

    a_hat: np.ndarray
    inputs: list[np.ndarray] = field(default_factory=list)   # H per layer in
    aggregated: list[np.ndarray] = field(default_factory=list)  # A_hat @ H
    pre_act: list[np.ndarray] = field(default_factory=list)  # before relu
    pooled: np.ndarray | None = None
    probs: np.ndarray | None = None


def _a_hat(graph: SceneGraph) -> np.ndarray:
    return graph.adjacency() + np.eye(graph.n_nodes)


def _forward(a_hat: np.ndarray, features: np.ndarray,
             params: GcnParams) -> _Trace:
    trace = _Trace(a_hat=a_hat)
    h = features
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        trace.inputs.append(h)
        m = a_hat @ h
        z = m @ w + b
        if not np.isfinite(z).all():
            raise GcnNumericsError(f"non-finite activation in layer {layer}")
        trace.aggregated.append(m)
        trace.pre_act.append(z)
        h = np.maximum(z, 0.0)
    g = h.mean(axis=0)
    logits = g @ params.readout_w + params.readout_b
    if not np.isfinite(logits).all():
        raise GcnNumericsError("non-finite logits in readout")
    trace.pooled = g
    trace.probs = softmax(logits)
    return trace


def predict(graph: SceneGraph, params: GcnParams) -> tuple[np.ndarray, int]:
    """Class probabilities and the arg-max class for one graph."""
    trace = _forward(_a_hat(graph), graph.features, params)
    probs = trace.probs
    return probs, int(np.argmax(probs))


def predict_proba(graph: SceneGraph, params: GcnParams) -> np.ndarray:
    return predict(graph, params)[0]


def loss_and_grad(batch: Sequence[tuple[SceneGraph, int]],
                  params: GcnParams) -> tuple[float, GcnParams]:
    """Mean cross-entropy over the batch and its analytic gradient.

    The batch is processed in its given order with a plain mean, so the
    value is independent of how callers shuffled it.
    """
    precomp = [(_a_hat(g), g.features, y) for g, y in batch]
    return _loss_and_grad_pre(precomp, params)


def _loss_and_grad_pre(batch: Sequence[tuple[np.ndarray, np.ndarray, int]],
                       params: GcnParams) -> tuple[float, GcnParams]:
    n_layers = len(params.weights)
    grad = GcnParams(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
        np.zeros_like(params.readout_w), np.zeros_like(params.readout_b))
    total = 0.0
    scale = 1.0 / len(batch)
    for a_hat, feats, y in batch:
        trace = _forward(a_hat, feats, params)
        p = trace.probs
        total += -np.log(max(p[y], 1e-300))

        dlogits = p.copy()
        dlogits[y] -= 1.0
        grad.readout_w += scale * np.outer(trace.pooled, dlogits)
        grad.readout_b += scale * dlogits
        dg = params.readout_w @ dlogits
        n = feats.shape[0]
        dh = np.tile(dg / n, (n, 1))
        for layer in range(n_layers - 1, -1, -1):
            dz = dh * (trace.pre_act[layer] > 0)
            grad.weights[layer] += scale * trace.aggregated[layer].T @ dz
            grad.biases[layer] += scale * dz.sum(axis=0)
            if layer > 0:
                dh = a_hat.T @ (dz @ params.weights[layer].T)
    return total * scale, grad


def loss(batch: Sequence[tuple[SceneGraph, int]], params: GcnParams) -> float:
    total = 0.0
    for g, y in batch:
        p = _forward(_a_hat(g), g.features, params).probs
        total += -np.log(max(p[y], 1e-300))
    return total / len(batch)


def train(dataset: Sequence[tuple[SceneGraph, int]],
          config: TrainConfig = TrainConfig(),
          n_classes: int | None = None) -> tuple[GcnParams, list[dict]]:
    """Minibatch SGD with momentum; returns params and per-epoch history.

    Epoch shuffling and init share one seeded generator, so identical
    inputs give bit-identical parameters. lr=0 leaves the init unchanged.
    """
    if not dataset:
        raise ValueError("empty training set")
    labels = [y for _, y in dataset]
    if min(labels) < 0:
        raise ValueError("negative class label")
    if n_classes is None:
        n_classes = max(labels) + 1
    elif max(labels) >= n_classes:
        raise ValueError("label outside n_classes")

    in_dim = dataset[0][0].features.shape[1]
    params = init_params(in_dim, n_classes, config)
    rng = np.random.default_rng((config.seed, 1))
    precomp = [(_a_hat(g), g.features, y) for g, y in dataset]
    velocity = [np.zeros_like(t) for t in params.flat()]
    history: list[dict] = []

    for epoch in range(config.epochs):
        order = rng.permutation(len(precomp))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = [precomp[i] for i in idx]
            value, grad = _loss_and_grad_pre(batch, params)
            epoch_loss += value
            n_batches += 1
            for vel, tensor, g in zip(velocity, params.flat(), grad.flat()):
                vel *= config.momentum
                vel -= config.lr * g
                tensor += vel
        history.append({"epoch": epoch, "loss": epoch_loss / n_batches})
    return params, history


def accuracy(dataset: Sequence[tuple[SceneGraph, int]],
             params: GcnParams) -> float:
    hits = sum(predict(g, params)[1] == y for g, y in dataset)
    return hits / len(dataset)


# --------------------------------------------------------------------------
# Parameter persistence: little-endian float64 tensor dump + JSON sidecar
# --------------------------------------------------------------------------

_MAGIC = b"GLOCPARM"


def save_params(params: GcnParams, path: Path,
                meta: dict | None = None) -> None:
    path = Path(path)
    tensors = params.flat()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", PARAMS_SCHEMA_VERSION, len(tensors)))
        fh.write(struct.pack("<I", len(params.weights)))
        for t in tensors:
            fh.write(struct.pack("<I", t.ndim))
            fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())
    doc = {"schema_version": PARAMS_SCHEMA_VERSION,
           "n_layers": len(params.weights),
           "n_classes": params.n_classes,
           "in_dim": params.in_dim}
    doc.update(meta or {})
    with open(path.with_suffix(path.suffix + ".meta.json"), "w",
              encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_params(path: Path) -> GcnParams:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path}: not a parameter file")
        version, n_tensors = struct.unpack("<II", fh.read(8))
        if version != PARAMS_SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported schema {version}")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        tensors = []
        for _ in range(n_tensors):
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            if data.size != count:
                raise ValueError(f"{path}: truncated tensor data")
            tensors.append(data.reshape(shape).astype(np.float64))
    if len(tensors) != 2 * n_layers + 2:
        raise ValueError(f"{path}: tensor count mismatch")
    return GcnParams(weights=tensors[:n_layers],
                     biases=tensors[n_layers:2 * n_layers],
                     readout_w=tensors[-2], readout_b=tensors[-1])
