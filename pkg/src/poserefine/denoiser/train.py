"""Training loop: corrupted-example synthesis -> forward -> loss -> Adam."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..diffusion import make_training_example
from ..errors import ConfigurationError, NumericalError
from .model import (
    DenoiserConfig,
    DenoiserParams,
    init_weights,
    loss_and_gradients,
    make_error_stats,
)
from .optim import AdamState, adam_step, decay_learning_rate


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 4
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    lr_decay: float = 0.96


def error_statistics(triplets):
    """Per-joint mean/std of x_noisy - x_gt pooled over all frames."""
    errors = [
        np.asarray(x_noisy, dtype=float) - np.asarray(x_gt, dtype=float)
        for _, x_noisy, x_gt in triplets
    ]
    return make_error_stats(np.concatenate(errors, axis=0))


def train(
    triplets,
    noise_model,
    schedule,
    config: DenoiserConfig,
    train_config: TrainConfig,
    rng: np.random.Generator,
    on_epoch=None,
):
    """Train the denoiser; returns (params, per-epoch log).

    One corrupted example is drawn per sequence up front (epsilon from the
    conditional noise model, a uniform timestep, the corrupted state); epochs
    then revisit the same examples in reshuffled minibatches.  All randomness
    flows through ``rng`` in a fixed order and gradient accumulation over a
    minibatch is sequential, so a seeded run is exactly reproducible and a
    zero learning rate is a true fixed point of the whole loop.
    """
    triplets = list(triplets)
    if not triplets:
        raise ConfigurationError("training dataset is empty")
    for idx, (y, _, x_gt) in enumerate(triplets):
        shape = np.asarray(y).shape
        if shape[0] != config.frames or shape[1] != config.joints:
            raise ConfigurationError(
                f"sequence {idx} has shape {shape[:2]}, "
                f"config expects ({config.frames}, {config.joints})"
            )
        if x_gt is None:
            raise ConfigurationError(f"sequence {idx} has no ground truth")

    e_mean, e_std = error_statistics(triplets)
    params = DenoiserParams(
        weights=init_weights(config, rng, zero_output=True),
        e_mean=e_mean,
        e_std=e_std,
    )
    state = AdamState.for_params(
        params.weights,
        learning_rate=train_config.learning_rate,
        beta1=train_config.beta1,
        beta2=train_config.beta2,
    )

    examples = [
        make_training_example(triplet, noise_model, schedule, rng)
        for triplet in triplets
    ]

    log = []
    epoch_losses = np.zeros(len(examples))
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(len(examples))
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start : start + train_config.batch_size]
            grad_sum = None
            for idx in batch:
                value, grads = loss_and_gradients(params, config, examples[idx])
                epoch_losses[idx] = value
                if grad_sum is None:
                    grad_sum = grads
                else:
                    for name in grad_sum:
                        grad_sum[name] += grads[name]
            inv = 1.0 / len(batch)
            for name in grad_sum:
                grad_sum[name] *= inv
            adam_step(params.weights, grad_sum, state)

        mean_loss = float(epoch_losses.mean())
        if not np.isfinite(mean_loss):
            raise NumericalError(
                f"training diverged: mean loss {mean_loss} at epoch {epoch} "
                f"(lr={state.learning_rate:.3e}, step={state.step})"
            )
        row = {
            "epoch": epoch,
            "mean_loss": mean_loss,
            "learning_rate": state.learning_rate,
        }
        log.append(row)
        if on_epoch is not None:
            on_epoch(row)
        decay_learning_rate(state, train_config.lr_decay)
    return params, log
