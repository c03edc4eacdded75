"""Sparse-sensor field reconstruction with a latent cross-attention model."""

from .config import ModelConfig, TrainSchedule
from .encoding import encode_ocean_cells, encode_positions, fourier_features, frequencies
from .model import Batch, ModelParams, decode, encode, forward, gradients, init_params, loss, param_shapes
from .optim import AdamState, adam_step
from .train import (
    FramePool,
    Reconstructor,
    TrainResult,
    read_checkpoint,
    reconstruct_field,
    split_frames,
    train,
    write_checkpoint,
    write_loss_history,
)

__all__ = [
    "AdamState",
    "Batch",
    "FramePool",
    "ModelConfig",
    "ModelParams",
    "Reconstructor",
    "TrainResult",
    "TrainSchedule",
    "adam_step",
    "decode",
    "encode",
    "encode_ocean_cells",
    "encode_positions",
    "forward",
    "fourier_features",
    "frequencies",
    "gradients",
    "init_params",
    "loss",
    "param_shapes",
    "read_checkpoint",
    "reconstruct_field",
    "split_frames",
    "train",
    "write_checkpoint",
    "write_loss_history",
]
