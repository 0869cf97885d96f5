"""Shared domain types and trace arithmetic.

Conventions used throughout the package:

* Time is measured in **hours** from the start of the recording (``t0``).
  Bin ``i`` of a trace covers ``[i*dt, (i+1)*dt)`` hours with
  ``dt = bin_minutes / 60``.
* Angular frequency is in **radians per hour**, so a 24 h rhythm has
  ``omega = 2*pi/24 ~= 0.2618 rad/h``.
* Light intervals are half-open ``[start_h, end_h)``; darkness is the
  default outside every interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DataError",
    "NumericalError",
    "ActivityTrace",
    "LightSchedule",
    "TraceGroup",
    "average_traces",
    "light_at",
]


class DataError(ValueError):
    """Malformed, inconsistent, or out-of-contract input data."""


class NumericalError(RuntimeError):
    """A computation failed to produce a usable numerical result."""


def _as_readonly(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"trace values must be 1-D, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ActivityTrace:
    """One channel's binned locomotor counts.

    ``values`` are beam-break counts per bin.  Uncorrupted data is
    nonnegative and integer-valued; traces that went through Gaussian
    corruption may hold arbitrary reals (including negatives), which is
    why ``values`` is stored as float.
    """

    channel_id: str
    t0: str  # ISO-8601 timestamp of the first bin's start
    bin_minutes: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.bin_minutes < 1:
            raise DataError(f"bin_minutes must be >= 1, got {self.bin_minutes}")
        object.__setattr__(self, "values", _as_readonly(self.values))
        if len(self.values) < 1:
            raise DataError("trace must hold at least one bin")

    @property
    def n_bins(self) -> int:
        return len(self.values)

    @property
    def dt_h(self) -> float:
        return self.bin_minutes / 60.0

    @property
    def duration_hours(self) -> float:
        return self.n_bins * self.bin_minutes / 60.0

    def times_h(self) -> np.ndarray:
        """Bin end times in hours (grid used by the phase estimator)."""
        return (np.arange(self.n_bins) + 1.0) * self.dt_h

    def centers_h(self) -> np.ndarray:
        """Bin center times in hours (grid used for waveform fitting)."""
        return (np.arange(self.n_bins) + 0.5) * self.dt_h

    def with_values(self, values: Iterable[float], channel_id: str | None = None) -> "ActivityTrace":
        return ActivityTrace(
            channel_id=self.channel_id if channel_id is None else channel_id,
            t0=self.t0,
            bin_minutes=self.bin_minutes,
            values=values,
        )


@dataclass(frozen=True)
class LightSchedule:
    """Ordered, non-overlapping light intervals.

    Each interval is ``(start_h, end_h, intensity_lux, wavelength_label)``
    with half-open extent ``[start_h, end_h)``.
    """

    intervals: tuple[tuple[float, float, float, str], ...] = ()

    def __post_init__(self) -> None:
        norm = tuple(
            (float(s), float(e), float(lux), str(wl)) for s, e, lux, wl in self.intervals
        )
        object.__setattr__(self, "intervals", norm)
        prev_end = -np.inf
        for s, e, lux, _ in norm:
            if not s < e:
                raise DataError(f"light interval must have start < end, got [{s}, {e})")
            if lux < 0:
                raise DataError(f"light intensity must be >= 0, got {lux}")
            if s < prev_end:
                raise DataError("light intervals must be sorted and non-overlapping")
            prev_end = e

    def edges(self) -> list[float]:
        """All on/off transition times, ascending."""
        out: list[float] = []
        for s, e, _, _ in self.intervals:
            out.extend((s, e))
        return sorted(out)


def light_at(schedule: LightSchedule, t_h: float) -> float:
    """Light intensity in lux at time ``t_h`` (0 outside every interval)."""
    for s, e, lux, _ in schedule.intervals:
        if s <= t_h < e:
            return lux
    return 0.0


def light_profile(schedule: LightSchedule, times_h: np.ndarray) -> np.ndarray:
    """Vectorized ``light_at`` over a time grid."""
    out = np.zeros(len(times_h))
    t = np.asarray(times_h)
    for s, e, lux, _ in schedule.intervals:
        out[(t >= s) & (t < e)] = lux
    return out


@dataclass(frozen=True)
class TraceGroup:
    """Traces sharing one time grid (e.g. the flies of one incubator)."""

    traces: tuple[ActivityTrace, ...]
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "traces", tuple(self.traces))
        if self.traces:
            _check_commensurate(self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def channel_ids(self) -> list[str]:
        return [t.channel_id for t in self.traces]

    def subset(self, channel_ids: Sequence[str]) -> "TraceGroup":
        wanted = set(channel_ids)
        return TraceGroup(
            traces=tuple(t for t in self.traces if t.channel_id in wanted),
            label=self.label,
        )

    def matrix(self) -> np.ndarray:
        """(n_traces, n_bins) stacked values."""
        return np.stack([t.values for t in self.traces])


def _check_commensurate(traces: Sequence[ActivityTrace]) -> None:
    ref = traces[0]
    bad = [
        t.channel_id
        for t in traces
        if t.t0 != ref.t0 or t.bin_minutes != ref.bin_minutes or t.n_bins != ref.n_bins
    ]
    if bad:
        raise DataError(
            "traces not commensurate with the group grid "
            f"(t0={ref.t0!r}, bin_minutes={ref.bin_minutes}, n_bins={ref.n_bins}): "
            + ", ".join(bad)
        )


def average_traces(group: TraceGroup) -> tuple[ActivityTrace, ActivityTrace]:
    """Pointwise mean and population standard deviation of a group.

    The mean trace inherits the group's grid metadata.  Standard
    deviation divides by ``n`` (the group is the full population of
    included flies, not a sample from one).
    """
    if len(group) == 0:
        raise DataError("cannot average an empty group")
    _check_commensurate(group.traces)
    stack = group.matrix()
    mean = stack.mean(axis=0)
    std = stack.std(axis=0)  # population: ddof=0
    ref = group.traces[0]
    label = group.label or "group"
    return (
        ref.with_values(mean, channel_id=f"{label}:mean"),
        ref.with_values(std, channel_id=f"{label}:std"),
    )
