"""Minimal deterministic dense-network engine.

Networks are stacks of fully connected layers (relu or linear), parameters
are float32, and training uses Adam. Everything is seeded and
single-threaded by default so that a fixed seed and data order reproduce
bit-identical weights.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels

ACTIVATIONS = ("linear", "relu")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

WEIGHT_MAGIC = b"TNN1"
_ACT_TAGS = {"linear": 0, "relu": 1}
_TAG_ACTS = {v: k for k, v in _ACT_TAGS.items()}


class NetworkError(ValueError):
    pass


class WeightFormatError(NetworkError):
    pass


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator; identical seeds yield identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise NetworkError(f"unknown activation {self.activation!r}")
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise NetworkError(f"bad layer shapes w{self.w.shape} b{self.b.shape}")

    @property
    def in_dim(self) -> int:
        return self.w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w.shape[0]


@dataclass
class Mlp:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise NetworkError("network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.in_dim != prev.out_dim:
                raise NetworkError(
                    f"layer dims do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        for layer in self.layers:
            if not (np.isfinite(layer.w).all() and np.isfinite(layer.b).all()):
                raise NetworkError("non-finite parameters")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers])

    def astype(self, dtype) -> "Mlp":
        return Mlp(
            [Layer(l.w.astype(dtype), l.b.astype(dtype), l.activation) for l in self.layers]
        )

    def param_bytes(self) -> bytes:
        """Concatenated raw parameter bytes; handy for freeze-contract checks."""
        return b"".join(l.w.tobytes() + l.b.tobytes() for l in self.layers)


def init_mlp(
    sizes: list[int],
    activations: list[str],
    rng: np.random.Generator,
    dtype=np.float32,
) -> Mlp:
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise NetworkError(f"invalid layer sizes {sizes}")
    if len(activations) != len(sizes) - 1:
        raise NetworkError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(sizes, sizes[1:], activations):
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)
        b = np.zeros(fan_out, dtype=dtype)
        layers.append(Layer(w, b, act))
    return Mlp(layers)


def forward(mlp: Mlp, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the network; returns (output, caches) with caches feeding backward.

    ``x`` may be a single vector (D,) or a batch (B, D).
    """
    x = np.asarray(x)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != mlp.in_dim:
        raise NetworkError(f"input dim {x.shape[1]} != network in dim {mlp.in_dim}")
    if not np.isfinite(x).all():
        raise NetworkError("non-finite network input")
    caches = []
    out = x
    for layer in mlp.layers:
        inp = out
        pre, out = kernels.dense_fwd(inp, layer.w, layer.b, layer.activation == "relu")
        caches.append((inp, pre))
    return (out[0] if single else out), caches


def predict(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    return forward(mlp, x)[0]


def mse_loss(prediction: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all components and its gradient wrt prediction."""
    prediction = np.asarray(prediction)
    target = np.asarray(target)
    if prediction.shape != target.shape:
        raise NetworkError(f"shape mismatch {prediction.shape} vs {target.shape}")
    diff = prediction - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(prediction.dtype)


def backward(mlp: Mlp, caches: list, grad_out: np.ndarray) -> tuple[list, np.ndarray]:
    """Reverse-mode gradients; returns ([(dW, db) per layer], dinput)."""
    if len(caches) != len(mlp.layers):
        raise NetworkError("caches do not match network depth")
    grad_out = np.asarray(grad_out)
    single = grad_out.ndim == 1
    if single:
        grad_out = grad_out[None, :]
    if grad_out.shape[1] != mlp.out_dim:
        raise NetworkError(f"gradient dim {grad_out.shape[1]} != out dim {mlp.out_dim}")
    grads: list = [None] * len(mlp.layers)
    d_out = grad_out
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        inp, pre = caches[i]
        d_w, d_b, d_out = kernels.dense_bwd(inp, layer.w, pre, d_out, layer.activation == "relu")
        grads[i] = (d_w, d_b)
    return grads, (d_out[0] if single else d_out)


@dataclass
class AdamState:
    """First/second-moment accumulators matching one Mlp's parameters."""

    learning_rate: float
    m: list = field(default_factory=list)  # (mW, mb) per layer
    v: list = field(default_factory=list)
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @staticmethod
    def for_mlp(mlp: Mlp, learning_rate: float) -> "AdamState":
        state = AdamState(learning_rate=learning_rate)
        for layer in mlp.layers:
            state.m.append((np.zeros_like(layer.w), np.zeros_like(layer.b)))
            state.v.append((np.zeros_like(layer.w), np.zeros_like(layer.b)))
        return state


def adam_step(mlp: Mlp, state: AdamState, grads: list) -> None:
    """One Adam update over every parameter, in place."""
    if len(grads) != len(mlp.layers) or len(state.m) != len(mlp.layers):
        raise NetworkError("gradient/state layout does not match the network")
    for (d_w, d_b), layer in zip(grads, mlp.layers):
        if d_w.shape != layer.w.shape or d_b.shape != layer.b.shape:
            raise NetworkError("gradient shapes do not match the network")
        if not (np.isfinite(d_w).all() and np.isfinite(d_b).all()):
            raise NetworkError("non-finite gradients")
    state.t += 1
    for layer, (d_w, d_b), (m_w, m_b), (v_w, v_b) in zip(mlp.layers, grads, state.m, state.v):
        kernels.adam_update(
            layer.w, d_w, m_w, v_w, state.learning_rate, state.beta1, state.beta2, state.eps, state.t
        )
        kernels.adam_update(
            layer.b, d_b, m_b, v_b, state.learning_rate, state.beta1, state.beta2, state.eps, state.t
        )


def save_weights(mlp: Mlp, path) -> None:
    """Binary container: magic "TNN1", then per layer rows/cols (int32 LE),
    one activation tag byte, row-major float32 LE weights, then biases."""
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        for layer in mlp.layers:
            rows, cols = layer.w.shape
            f.write(struct.pack("<ii", rows, cols))
            f.write(struct.pack("B", _ACT_TAGS[layer.activation]))
            f.write(np.ascontiguousarray(layer.w, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(layer.b, dtype="<f4").tobytes())


def load_weights(path) -> Mlp:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != WEIGHT_MAGIC:
        got = data[:4].decode("ascii", errors="replace") if data else "<empty>"
        raise WeightFormatError(f"bad weight file magic {got!r}, expected TNN1")
    off = 4
    layers = []
    while off < len(data):
        if off + 9 > len(data):
            raise WeightFormatError("truncated layer header")
        rows, cols = struct.unpack_from("<ii", data, off)
        tag = data[off + 8]
        off += 9
        if rows <= 0 or cols <= 0:
            raise WeightFormatError(f"invalid layer shape {rows}x{cols}")
        if tag not in _TAG_ACTS:
            raise WeightFormatError(f"unknown activation tag {tag}")
        n_w = rows * cols * 4
        n_b = rows * 4
        if off + n_w + n_b > len(data):
            raise WeightFormatError("truncated layer payload")
        w = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=off).reshape(rows, cols)
        off += n_w
        b = np.frombuffer(data, dtype="<f4", count=rows, offset=off)
        off += n_b
        layers.append(Layer(w.copy(), b.copy(), _TAG_ACTS[tag]))
    if not layers:
        raise WeightFormatError("weight file contains no layers")
    return Mlp(layers)
