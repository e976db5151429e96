"""Cosine noise schedule and the shortened reverse-time step sequence.

The schedule stores, for a maximum step count ``t_max``, the per-step noise
fractions ``beta[t]``, retention factors ``alpha[t] = 1 - beta[t]`` and the
cumulative retention ``alpha_bar[t] = prod(alpha[1..t])`` with
``alpha_bar[0] = 1`` pinned exactly.  ``alpha_bar`` follows the cosine decay
``f(t) = cos^2(((t/T + s) / (1 + s)) * pi/2)`` normalised by ``f(0)``, with
per-step betas clipped at 0.999 so every step keeps a sliver of signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

BETA_CLIP = 0.999


def _cosine_decay(t: float, t_max: int, offset_s: float) -> float:
    """f(t) = cos^2(((t/T + s) / (1 + s)) * pi/2)."""
    arg = (t / t_max + offset_s) / (1.0 + offset_s) * math.pi / 2.0
    return math.cos(arg) ** 2


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable per-timestep diffusion coefficients.

    ``beta`` and ``alpha`` hold steps t = 1..t_max at index t-1;
    ``alpha_bar`` has length t_max + 1 and is indexed by t directly.
    """

    t_max: int
    offset_s: float
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    def alpha_bar_at(self, t: int) -> float:
        if not 0 <= t <= self.t_max:
            raise ConfigurationError(
                f"timestep {t} outside schedule range [0, {self.t_max}]"
            )
        return float(self.alpha_bar[t])


def build_cosine_schedule(t_max: int, offset_s: float) -> NoiseSchedule:
    """Build the cosine schedule for ``t_max`` steps with offset ``offset_s``.

    Betas are derived from consecutive ratios of the normalised cosine decay
    and clipped to 0.999; ``alpha_bar`` is then re-accumulated as the running
    product of ``1 - beta`` so the stored arrays stay mutually consistent
    (exactly, not just to rounding) even where clipping bites.
    """
    if not isinstance(t_max, (int, np.integer)) or isinstance(t_max, bool):
        raise ConfigurationError(f"t_max must be an integer, got {t_max!r}")
    if t_max < 1:
        raise ConfigurationError(f"t_max must be >= 1, got {t_max}")
    if not (0.0 < offset_s < 1.0):
        raise ConfigurationError(f"offset_s must lie in (0, 1), got {offset_s!r}")

    t_max = int(t_max)
    f0 = _cosine_decay(0.0, t_max, offset_s)
    decay = np.array(
        [_cosine_decay(t, t_max, offset_s) / f0 for t in range(t_max + 1)]
    )
    beta = np.minimum(1.0 - decay[1:] / decay[:-1], BETA_CLIP)
    alpha = 1.0 - beta
    alpha_bar = np.concatenate(([1.0], np.cumprod(alpha)))

    for arr in (beta, alpha, alpha_bar):
        arr.flags.writeable = False
    return NoiseSchedule(
        t_max=t_max, offset_s=float(offset_s), beta=beta, alpha=alpha, alpha_bar=alpha_bar
    )


def ddim_subsequence(schedule: NoiseSchedule, k_steps: int) -> list[int]:
    """Pick ``k_steps`` reverse timesteps, uniformly spaced from t_max down.

    Returns ``[round(i * t_max / k_steps) for i = k_steps..1]``: strictly
    decreasing, starting at t_max; the implied successor of the last entry
    is timestep 0.
    """
    if not isinstance(k_steps, (int, np.integer)) or isinstance(k_steps, bool):
        raise ConfigurationError(f"k_steps must be an integer, got {k_steps!r}")
    if not 1 <= k_steps <= schedule.t_max:
        raise ConfigurationError(
            f"k_steps must lie in [1, {schedule.t_max}], got {k_steps}"
        )
    return [round(i * schedule.t_max / k_steps) for i in range(int(k_steps), 0, -1)]
