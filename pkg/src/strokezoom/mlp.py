"""Minimal fully-connected network with explicit forward/backward passes
and an Adam optimizer. ReLU hidden layers, sigmoid output.

Parameters default to float32; pass dtype=np.float64 when gradients are
being checked against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

__all__ = [
    "MlpModel",
    "AdamState",
    "ModelFormatError",
    "ModelTruncatedError",
    "init_mlp",
    "forward",
    "backward",
    "adam_init",
    "adam_step",
    "save_mlp",
    "load_mlp",
]

MODEL_MAGIC = b"SBCA-MLP1"


class ModelFormatError(ValueError):
    """Model file does not start with the expected magic or layout."""


class ModelTruncatedError(ModelFormatError):
    """Model file ends before all parameters could be read."""


@dataclass
class MlpModel:
    layer_dims: list
    weights: list = field(repr=False)  # per layer, shape (fan_in, fan_out)
    biases: list = field(repr=False)   # per layer, shape (fan_out,)

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def dtype(self):
        return self.weights[0].dtype


@dataclass
class AdamState:
    m: list = field(repr=False)
    v: list = field(repr=False)
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_mlp(layer_dims, rng: np.random.Generator, dtype=np.float32) -> MlpModel:
    """He-uniform weights (U(+-sqrt(6 / fan_in))), zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("need at least an input and an output layer")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def _check_batch(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=model.dtype)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ValueError(
            f"batch shape {x.shape} incompatible with input dim {model.in_dim}"
        )
    return x


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Affine + ReLU through the hidden layers, sigmoid on the last."""
    h = _check_batch(model, batch)
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = expit(z) if i == last else np.maximum(z, 0.0)
    return h


def backward(model: MlpModel, batch: np.ndarray, grad_out: np.ndarray):
    """Exact reverse-mode gradients of forward(), contracted with grad_out.

    Returns a list of (dW, db) pairs, one per layer, summed over the batch.
    The ReLU subgradient at zero is taken as zero.
    """
    x = _check_batch(model, batch)
    g = np.asarray(grad_out, dtype=model.dtype)
    last = len(model.weights) - 1

    acts = [x]
    zs = []
    h = x
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        zs.append(z)
        h = expit(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    if g.shape != acts[-1].shape:
        raise ValueError(
            f"upstream gradient shape {g.shape} != output shape {acts[-1].shape}"
        )

    grads = [None] * len(model.weights)
    out = acts[-1]
    delta = g * out * (1.0 - out)  # sigmoid'
    for i in range(last, -1, -1):
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ model.weights[i].T) * (zs[i - 1] > 0)
    return grads


def adam_step(model: MlpModel, grads, state: AdamState) -> None:
    """One Adam update with bias correction, applied in place."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    scale = state.lr * np.sqrt(1.0 - b2**t) / (1.0 - b1**t)
    params = []
    for (w, b), (dw, db) in zip(zip(model.weights, model.biases), grads):
        params.append((w, np.asarray(dw, dtype=w.dtype)))
        params.append((b, np.asarray(db, dtype=b.dtype)))
    flat_m = state.m
    flat_v = state.v
    for (p, g), m, v in zip(params, flat_m, flat_v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (scale * m / (np.sqrt(v) + state.eps)).astype(p.dtype)


def adam_init(model: MlpModel, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """Zeroed moment accumulators matching the model's parameters."""
    m, v = [], []
    for w, b in zip(model.weights, model.biases):
        m.extend([np.zeros_like(w), np.zeros_like(b)])
        v.extend([np.zeros_like(w), np.zeros_like(b)])
    return AdamState(m=m, v=v, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def save_mlp(model: MlpModel, path) -> None:
    """Binary format: magic, u32 layer count, u32 dims, f32 params.

    All integers little-endian; weights row-major, each layer's weights
    followed by its biases, layers in order.
    """
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(model.layer_dims)))
        fh.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_mlp(path, dtype=np.float32) -> MlpModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MODEL_MAGIC):
        raise ModelFormatError(f"bad model magic in {path}")
    off = len(MODEL_MAGIC)
    if len(data) < off + 4:
        raise ModelTruncatedError(f"model file {path} truncated in header")
    (n_layers,) = struct.unpack_from("<I", data, off)
    off += 4
    if n_layers < 2 or len(data) < off + 4 * n_layers:
        raise ModelTruncatedError(f"model file {path} truncated in dims")
    dims = list(struct.unpack_from(f"<{n_layers}I", data, off))
    off += 4 * n_layers
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        need = 4 * (fan_in * fan_out + fan_out)
        if len(data) < off + need:
            raise ModelTruncatedError(f"model file {path} truncated in parameters")
        w = np.frombuffer(data, dtype="<f4", count=fan_in * fan_out, offset=off)
        off += 4 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f4", count=fan_out, offset=off)
        off += 4 * fan_out
        weights.append(w.reshape(fan_in, fan_out).astype(dtype))
        biases.append(b.astype(dtype))
    if off != len(data):
        raise ModelFormatError(f"model file {path} has {len(data) - off} trailing bytes")
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)
