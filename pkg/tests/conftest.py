"""Shared helpers and fixtures for the test suite."""

import numpy as np
import pytest

from poserefine.denoiser.model import DenoiserParams, forward, init_weights


def finite_difference_gradients(params, config, example, h=1e-5):
    """Central finite differences of the training loss over every weight."""

    def loss_now():
        e_hat = forward(params, config, example.y, example.x_t, example.t)
        return float(np.linalg.norm(e_hat - example.e))

    fd = {}
    for name, arr in params.weights.items():
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = loss_now()
            flat[i] = orig - h
            minus = loss_now()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2.0 * h)
        fd[name] = grad
    return fd


def max_relative_error(analytic: dict, numeric: dict) -> tuple[float, str]:
    """Worst elementwise relative error across all parameter blocks.

    The denominator is floored at 1e-6 so negligible entries are compared
    absolutely (finite differences resolve gradients to ~1e-10 here).
    """
    worst, worst_name = 0.0, ""
    for name in analytic:
        a, b = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
        rel = float((np.abs(a - b) / denom).max())
        if rel > worst:
            worst, worst_name = rel, name
    return worst, worst_name


def random_denoiser(config, rng, e_scale=1.0):
    """Denoiser params with non-degenerate weights and error statistics."""
    weights = init_weights(config, rng, zero_output=False)
    e_mean = 0.1 * e_scale * rng.standard_normal((config.joints, 3))
    e_std = e_scale * rng.uniform(0.5, 1.5, (config.joints, 3))
    return DenoiserParams(weights=weights, e_mean=e_mean, e_std=e_std)


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def random_rotation(rng) -> np.ndarray:
    """Haar-ish random proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture(scope="session")
def small_dataset():
    """A small synthetic dataset shared by fitting/training tests."""
    from poserefine.data import SynthConfig, generate_dataset

    rng = np.random.default_rng(11)
    config = SynthConfig(sequences=24, frames=9)
    return generate_dataset(config, rng)
