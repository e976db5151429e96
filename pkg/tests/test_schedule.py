import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poserefine.errors import ConfigurationError
from poserefine.schedule import BETA_CLIP, build_cosine_schedule, ddim_subsequence


def closed_form_alpha_bar(t: int, t_max: int, s: float) -> float:
    """High-precision cos^2 ratio, used as an independent oracle."""
    with mpmath.workdps(50):
        def f(u):
            return mpmath.cos((mpmath.mpf(u) / t_max + s) / (1 + s) * mpmath.pi / 2) ** 2

        return float(f(t) / f(0))


@pytest.fixture(scope="module")
def default_schedule():
    return build_cosine_schedule(50, 0.008)


def test_alpha_bar_starts_at_one_exactly(default_schedule):
    assert default_schedule.alpha_bar[0] == 1.0


def test_terminal_alpha_bar_is_zero_before_clipping():
    # the raw cosine ratio at t = T is cos^2(pi/2) / f(0), i.e. zero
    assert closed_form_alpha_bar(50, 50, 0.008) < 1e-30


def test_terminal_alpha_bar_small_after_clipping(default_schedule):
    assert default_schedule.alpha_bar[50] <= 1e-6
    assert default_schedule.alpha_bar[50] > 0.0


def test_midpoint_matches_high_precision_closed_form(default_schedule):
    expected = closed_form_alpha_bar(25, 50, 0.008)
    assert abs(expected - 0.494) < 1e-3  # sanity anchor for the oracle itself
    assert abs(default_schedule.alpha_bar[25] - expected) < 1e-10


def test_alpha_bar_strictly_decreasing(default_schedule):
    assert np.all(np.diff(default_schedule.alpha_bar) < 0.0)


def test_alpha_bar_consistent_with_betas(default_schedule):
    rebuilt = np.concatenate(([1.0], np.cumprod(1.0 - default_schedule.beta)))
    np.testing.assert_allclose(rebuilt, default_schedule.alpha_bar, rtol=1e-12)


def test_betas_in_open_unit_interval(default_schedule):
    assert np.all(default_schedule.beta > 0.0)
    assert np.all(default_schedule.beta <= BETA_CLIP)
    assert np.all(default_schedule.alpha == 1.0 - default_schedule.beta)


def test_alpha_bar_at_bounds(default_schedule):
    assert default_schedule.alpha_bar_at(0) == 1.0
    with pytest.raises(ConfigurationError):
        default_schedule.alpha_bar_at(51)
    with pytest.raises(ConfigurationError):
        default_schedule.alpha_bar_at(-1)


@pytest.mark.parametrize(
    "t_max, offset_s",
    [(0, 0.008), (-3, 0.008), (1.5, 0.008), (50, 0.0), (50, 1.0), (50, -0.2)],
)
def test_invalid_construction_rejected(t_max, offset_s):
    with pytest.raises(ConfigurationError):
        build_cosine_schedule(t_max, offset_s)


def test_schedule_arrays_are_immutable(default_schedule):
    with pytest.raises(ValueError):
        default_schedule.alpha_bar[0] = 0.5


def test_ddim_subsequence_examples(default_schedule):
    assert ddim_subsequence(default_schedule, 2) == [50, 25]
    assert ddim_subsequence(default_schedule, 50) == list(range(50, 0, -1))
    assert ddim_subsequence(default_schedule, 5) == [50, 40, 30, 20, 10]


def test_ddim_subsequence_structure_for_all_k(default_schedule):
    for k in range(1, 51):
        steps = ddim_subsequence(default_schedule, k)
        assert len(steps) == k
        assert steps[0] == 50
        assert all(a > b for a, b in zip(steps, steps[1:]))
        assert steps[-1] >= 1


@pytest.mark.parametrize("k", [0, -1, 51])
def test_ddim_subsequence_range_checks(k, default_schedule):
    with pytest.raises(ConfigurationError):
        ddim_subsequence(default_schedule, k)


@settings(max_examples=40, deadline=None)
@given(
    t_max=st.integers(min_value=1, max_value=300),
    offset_s=st.floats(min_value=1e-4, max_value=0.9),
)
def test_schedule_invariants_property(t_max, offset_s):
    schedule = build_cosine_schedule(t_max, offset_s)
    assert schedule.alpha_bar[0] == 1.0
    assert np.all(np.diff(schedule.alpha_bar) < 0.0)
    assert np.all((schedule.beta > 0.0) & (schedule.beta < 1.0))
    rebuilt = np.concatenate(([1.0], np.cumprod(schedule.alpha)))
    np.testing.assert_allclose(rebuilt, schedule.alpha_bar, rtol=1e-12)
