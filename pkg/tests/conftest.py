"""Shared fixtures: deterministic traces and a materialized scenario."""

from __future__ import annotations

import math

import numpy as np
import pytest

from circatrack import ActivityTrace
from circatrack.cli import default_scenario, run_scenario

TWO_PI = 2.0 * math.pi

T0 = "2024-01-01T08:00:00"


def sine_trace(amplitude: float = 4.0, bias: float = 5.0, period_h: float = 24.45,
               phase_rad: float = 0.7, days: int = 12, bin_minutes: int = 1,
               channel_id: str = "sine") -> ActivityTrace:
    """Noise-free biased sinusoid on the standard grid."""
    dt = bin_minutes / 60.0
    n = int(round(days * 24.0 / dt))
    t = (np.arange(n) + 1.0) * dt
    y = bias + amplitude * np.sin(TWO_PI * t / period_h + phase_rad)
    return ActivityTrace(channel_id=channel_id, t0=T0,
                         bin_minutes=bin_minutes, values=y)


def assert_argument_continuous(series, limit_rad: float = math.pi) -> None:
    """The unwrapped argument never jumps a half turn between bins."""
    steps = np.abs(np.diff(series.argument_rad))
    assert steps.max() < limit_rad, (
        f"{series.channel_id}: argument jumps {steps.max():.3f} rad between bins"
    )


@pytest.fixture(scope="session")
def scenario_dir(tmp_path_factory):
    """The 9-incubator light-pulse scenario, materialized once."""
    out = tmp_path_factory.mktemp("scenario")
    run_scenario(default_scenario(), out)
    return out
