"""Dense-network engine: float32 MLPs, backprop, Adam, weight files."""
from .core import (
    AdamState,
    Layer,
    Mlp,
    NetworkError,
    WeightFormatError,
    adam_step,
    backward,
    forward,
    init_mlp,
    load_weights,
    mse_loss,
    predict,
    save_weights,
    seeded_rng,
)
from .kernels import BACKEND, compiled_available

__all__ = [
    "AdamState",
    "Layer",
    "Mlp",
    "NetworkError",
    "WeightFormatError",
    "adam_step",
    "backward",
    "forward",
    "init_mlp",
    "load_weights",
    "mse_loss",
    "predict",
    "save_weights",
    "seeded_rng",
    "BACKEND",
    "compiled_available",
]
