"""Pose denoiser network, exact-gradient training and Adam optimizer."""

from .model import (
    DenoiserConfig,
    DenoiserParams,
    as_predictor,
    backward,
    count_params,
    forward,
    init_weights,
    loss,
    loss_and_gradients,
    make_error_stats,
    param_shapes,
    timestep_embedding,
)
from .optim import AdamState, adam_step, decay_learning_rate
from .train import TrainConfig, error_statistics, train

__all__ = [
    "AdamState",
    "DenoiserConfig",
    "DenoiserParams",
    "TrainConfig",
    "adam_step",
    "as_predictor",
    "backward",
    "count_params",
    "decay_learning_rate",
    "error_statistics",
    "forward",
    "init_weights",
    "loss",
    "loss_and_gradients",
    "make_error_stats",
    "param_shapes",
    "timestep_embedding",
    "train",
]
