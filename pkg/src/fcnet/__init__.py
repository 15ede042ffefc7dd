"""Fourier controller networks: causal spectral convolution with matching
parallel and streaming execution, plus training, data and benchmark tools."""

from .csc import CscConfig, CscWeights
from .model import (
    FcnetConfig,
    FcnetParams,
    StreamState,
    forward_parallel,
    forward_step,
    init_params,
    new_stream,
    reset_stream,
    suggest_modes,
)
from .checkpoint import load_checkpoint, save_checkpoint

__version__ = "0.1.0"

__all__ = [
    "CscConfig",
    "CscWeights",
    "FcnetConfig",
    "FcnetParams",
    "StreamState",
    "forward_parallel",
    "forward_step",
    "init_params",
    "new_stream",
    "reset_stream",
    "suggest_modes",
    "load_checkpoint",
    "save_checkpoint",
]
