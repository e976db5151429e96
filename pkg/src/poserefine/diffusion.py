"""Forward corruption, training-example construction and reverse refinement.

The forward process mixes the clean pose toward a *structured* noise sample
``epsilon = x0 + e`` (not standard Gaussian noise):

    x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * epsilon

so at abar_T ~ 0 the state lands on the noisy-pose distribution.  The
coefficients intentionally sum to more than 1 for interior t; the reverse
update divides it back out exactly:

    x0_hat  = (x_k - sqrt(1 - abar_k) * e_hat) / (sqrt(1 - abar_k) + sqrt(abar_k))
    x_prev  = (sqrt(1 - abar_prev) + sqrt(abar_prev)) * x0_hat
              + sqrt(1 - abar_prev) * e_hat

Refinement runs the reverse update over a shortened, deterministic timestep
subsequence, starting from the estimator output as x_T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .gaussian import CondGaussianModel, sample_noisy_pose
from .schedule import NoiseSchedule, ddim_subsequence


@dataclass(frozen=True)
class TrainingExample:
    y: np.ndarray    # (N, J, 2) conditioning 2D pose
    x_t: np.ndarray  # (N, J, 3) corrupted state
    t: int
    e: np.ndarray    # (N, J, 3) error target, epsilon - x0


def _check_alpha_bar(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
    return value


def forward_corrupt(x0: np.ndarray, epsilon: np.ndarray, alpha_bar_t: float) -> np.ndarray:
    """x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * epsilon, elementwise."""
    x0 = np.asarray(x0, dtype=float)
    epsilon = np.asarray(epsilon, dtype=float)
    if x0.shape != epsilon.shape:
        raise ShapeError(f"x0 shape {x0.shape} != epsilon shape {epsilon.shape}")
    abar = _check_alpha_bar(alpha_bar_t, "alpha_bar_t")
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * epsilon


def make_training_example(
    triplet,
    noise_model: CondGaussianModel,
    schedule: NoiseSchedule,
    rng: np.random.Generator,
) -> TrainingExample:
    """Sample one corrupted training instance from a (y, x_noisy, x_gt) triplet.

    Draw order is fixed (epsilon first, then the timestep) so a seeded
    generator reproduces examples exactly.
    """
    y, x_noisy, x_gt = triplet
    y = np.asarray(y, dtype=float)
    x_gt = np.asarray(x_gt, dtype=float)
    epsilon = sample_noisy_pose(noise_model, x_gt, y, x_noisy, rng)
    t = int(rng.integers(1, schedule.t_max + 1))
    x_t = forward_corrupt(x_gt, epsilon, schedule.alpha_bar[t])
    return TrainingExample(y=y, x_t=x_t, t=t, e=epsilon - x_gt)


def reverse_step(
    x_k: np.ndarray,
    e_hat: np.ndarray,
    alpha_bar_k: float,
    alpha_bar_prev: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One deterministic reverse update; returns (x0_hat, x_prev).

    The denominator sqrt(1 - abar) + sqrt(abar) is >= 1 for abar in [0, 1],
    so the inversion is always well posed.
    """
    x_k = np.asarray(x_k, dtype=float)
    e_hat = np.asarray(e_hat, dtype=float)
    if x_k.shape != e_hat.shape:
        raise ShapeError(f"x_k shape {x_k.shape} != e_hat shape {e_hat.shape}")
    abar_k = _check_alpha_bar(alpha_bar_k, "alpha_bar_k")
    abar_prev = _check_alpha_bar(alpha_bar_prev, "alpha_bar_prev")

    denom = np.sqrt(1.0 - abar_k) + np.sqrt(abar_k)
    x0_hat = (x_k - np.sqrt(1.0 - abar_k) * e_hat) / denom
    x_prev = (np.sqrt(1.0 - abar_prev) + np.sqrt(abar_prev)) * x0_hat + np.sqrt(
        1.0 - abar_prev
    ) * e_hat
    return x0_hat, x_prev


def refine(
    y: np.ndarray,
    x_noisy: np.ndarray,
    predict_fn,
    schedule: NoiseSchedule,
    k_steps: int,
) -> np.ndarray:
    """Run the reverse process from x_T := x_noisy and return the clean estimate.

    ``predict_fn(y, x_k, k)`` must return the predicted error for state x_k at
    timestep k.  The loop visits the uniformly spaced timestep subsequence and
    returns the x0 estimate of the final step (no stochastic sampling anywhere,
    so identical inputs give identical outputs).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x_noisy, dtype=float)
    if y.ndim != 3 or y.shape[2] != 2 or x.shape != y.shape[:2] + (3,):
        raise ShapeError(f"inconsistent shapes: 2d {y.shape}, noisy {x.shape}")

    steps = ddim_subsequence(schedule, k_steps)
    x0_hat = x
    for i, k in enumerate(steps):
        e_hat = np.asarray(predict_fn(y, x, k), dtype=float)
        if e_hat.shape != x.shape:
            raise ConfigurationError(
                f"denoiser returned shape {e_hat.shape}, expected {x.shape}"
            )
        prev_t = steps[i + 1] if i + 1 < len(steps) else 0
        x0_hat, x = reverse_step(
            x, e_hat, schedule.alpha_bar[k], schedule.alpha_bar[prev_t]
        )
    return x0_hat
