"""Phase-response curves: pulsed groups compared against a free-running control.

Sign convention (documented here once, used everywhere): a phase
ADVANCE is POSITIVE.  An advanced fly's activity peak happens earlier
in wall time; equivalently its oscillator argument leads the control's.
The two measurement routes express that with opposite subtractions:

- tracker route: ``phase_h`` measures lead in hours, so
  shift = mean over the evaluation day of (target - control);
- peak-time route: the regression-predicted daily acrophase is an event
  time, so shift = control prediction - target prediction.

Both are wrapped once, at the end, to the principal value (-12, 12] —
per-bin values are unwrapped reals, so a true -11.5 h delay reports as
-11.5 rather than folding to +12.5.

Dispersion per curve point follows the variance-composition rule
``sd = sqrt(var_target + var_control)``, where each variance is taken
across per-fly shifts inside the group: every included fly is measured
individually against the *control group mean*, and the group shift
itself comes from the group-mean traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .anf import AnfParams, PhaseSeries, extract_phase, run_group
from .core import ActivityTrace, DataError, TraceGroup, average_traces
from .cosinor import AcrophaseTrack, daily_acrophases
from .periodogram import ACTIVITY_FLOOR, RATIO_THRESHOLD, screen_flies

__all__ = [
    "PrcPoint",
    "PrcCurve",
    "wrap12",
    "phase_shift_anf",
    "phase_shift_acrophase",
    "build_prc",
    "DEFAULT_ANALYSIS_WINDOW_H",
    "DEFAULT_EVAL_DAY",
]

# Days 6-12 of the protocol: after pulse transients, before the trace ends.
DEFAULT_ANALYSIS_WINDOW_H = (120.0, 288.0)
DEFAULT_EVAL_DAY = 10

TWO_PI = 2.0 * math.pi


def wrap12(hours: float) -> float:
    """Wrap an hour difference to the principal interval (-12, 12]."""
    return float(hours - 24.0 * math.ceil((hours - 12.0) / 24.0))


@dataclass(frozen=True)
class PrcPoint:
    """One stimulus phase: CP of pulse onset, group shift, dispersion."""

    cp_h: float
    shift_h: float
    sd_h: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.cp_h < 24.0:
            raise DataError(f"cp_h must lie in [0, 24), got {self.cp_h}")
        if not -12.0 < self.shift_h <= 12.0:
            raise DataError(f"shift_h must lie in (-12, 12], got {self.shift_h}")
        if not self.sd_h >= 0.0:
            raise DataError(f"sd_h must be >= 0, got {self.sd_h}")


@dataclass(frozen=True)
class PrcCurve:
    method: str                      # estimator ("anf" | "acrophase") or a
    #                                  reference label such as "programmed"
    points: tuple[PrcPoint, ...]     # sorted by cp_h, cp values unique
    eval_day: int
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.method:
            raise DataError("PRC curve needs a method label")
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        cps = [p.cp_h for p in self.points]
        if sorted(cps) != cps or len(set(cps)) != len(cps):
            raise DataError("PRC points must be sorted by cp_h with unique cp values")
        if self.eval_day < 1:
            raise DataError(f"eval_day must be >= 1, got {self.eval_day}")

    def cp_values(self) -> np.ndarray:
        return np.asarray([p.cp_h for p in self.points])

    def shifts(self) -> np.ndarray:
        return np.asarray([p.shift_h for p in self.points])

    def sds(self) -> np.ndarray:
        return np.asarray([p.sd_h for p in self.points])


def _day_window(eval_day: int) -> tuple[float, float]:
    if eval_day < 1:
        raise DataError(f"eval_day must be >= 1, got {eval_day}")
    return 24.0 * (eval_day - 1), 24.0 * eval_day


def phase_shift_anf(target: PhaseSeries, control: PhaseSeries,
                    eval_day: int = DEFAULT_EVAL_DAY) -> float:
    """Mean phase lead of target over control across the evaluation day.

    Both series must be phase-defined and detrended on a common time
    base (the control's fitted line imposed on the target via
    ``extract_phase(..., trend=...)``); otherwise the hour difference
    is not meaningful and a DataError is raised.  A difference of
    unwrapped arguments is only observable modulo one cycle (capture
    transients can wind whole extra turns), so the difference is first
    reduced modulo the common fitted period ``2*pi/beta`` and then
    wrapped once to (-12, 12], advance positive.
    """
    lo, hi = _day_window(eval_day)
    for name, series in (("target", target), ("control", control)):
        if not series.phase_defined:
            raise DataError(f"{name} series has no defined phase")
    if not (math.isclose(target.trend_beta_rad_per_h, control.trend_beta_rad_per_h,
                         rel_tol=1e-9, abs_tol=0.0)
            and math.isclose(target.trend_alpha_rad, control.trend_alpha_rad,
                             rel_tol=1e-9, abs_tol=1e-9)):
        raise DataError(
            "series are on different time bases; detrend the target with the "
            "control's line: extract_phase(target, window, trend=(alpha, beta))"
        )
    for name, series in (("target", target), ("control", control)):
        if series.times_h[-1] < hi - 1e-9 or series.times_h[0] > lo + 1e-9 + (
                series.times_h[1] - series.times_h[0] if len(series.times_h) > 1 else 0.0):
            raise DataError(f"{name} series does not cover day {eval_day}")
    t_mask = (target.times_h >= lo) & (target.times_h < hi)
    c_mask = (control.times_h >= lo) & (control.times_h < hi)
    diff = float(np.mean(target.phase_h[t_mask]) - np.mean(control.phase_h[c_mask]))
    tau_h = TWO_PI / control.trend_beta_rad_per_h
    diff -= tau_h * round(diff / tau_h)
    return wrap12(diff)


def phase_shift_acrophase(target: AcrophaseTrack, control: AcrophaseTrack,
                          eval_day: int = DEFAULT_EVAL_DAY) -> float:
    """Shift between regression-predicted daily peak times at ``eval_day``.

    An advance moves the predicted peak earlier, so the difference runs
    control minus target; wrapped once to (-12, 12].  The regression is
    total on any track with >= 3 valid days, so a day dropped inside
    either track does not prevent evaluation.
    """
    _day_window(eval_day)  # validates eval_day
    c = control.predicted_clock_h(float(eval_day))
    t = target.predicted_clock_h(float(eval_day))
    if not (math.isfinite(c) and math.isfinite(t)):
        raise DataError("acrophase regression prediction is not finite")
    return wrap12(c - t)


def _anf_shifts(group: TraceGroup, mean_trace: ActivityTrace,
                control_series: PhaseSeries | None, params: AnfParams,
                window: tuple[float, float],
                eval_day: int) -> tuple[float | None, list[float], PhaseSeries]:
    """Group-mean shift, per-fly shifts, and the group-mean series.

    With ``control_series`` None this *is* the control group: the mean
    series anchors the common time base and no shifts are computed
    against it (the group shift is trivially 0).
    """
    series = run_group([mean_trace] + list(group.traces), params=params,
                       detrend_window=None)
    if control_series is None:
        mean_series = extract_phase(series[0], window)
        trend = (mean_series.trend_alpha_rad, mean_series.trend_beta_rad_per_h)
        ref = mean_series
        group_shift = None
    else:
        trend = (control_series.trend_alpha_rad, control_series.trend_beta_rad_per_h)
        mean_series = extract_phase(series[0], window, trend=trend)
        ref = control_series
        group_shift = phase_shift_anf(mean_series, ref, eval_day)
    per_fly = [
        phase_shift_anf(extract_phase(s, window, trend=trend), ref, eval_day)
        for s in series[1:]
    ]
    return group_shift, per_fly, mean_series


def _acro_shifts(group: TraceGroup, mean_trace: ActivityTrace,
                 control_track: AcrophaseTrack | None,
                 window: tuple[float, float],
                 eval_day: int) -> tuple[float | None, list[float], AcrophaseTrack]:
    mean_track = daily_acrophases(mean_trace, window=window)
    ref = control_track if control_track is not None else mean_track
    group_shift = (phase_shift_acrophase(mean_track, control_track, eval_day)
                   if control_track is not None else None)
    per_fly = []
    for trace in group.traces:
        try:
            track = daily_acrophases(trace, window=window)
        except DataError:
            continue  # fewer than 3 days with a defined peak: no per-fly shift
        per_fly.append(phase_shift_acrophase(track, ref, eval_day))
    return group_shift, per_fly, mean_track


def _variance(shifts: list[float]) -> float:
    if len(shifts) < 2:
        return 0.0
    return float(np.var(np.asarray(shifts), ddof=1))


def build_prc(scenarios: Mapping[float, TraceGroup], control: TraceGroup,
              method: str = "anf", eval_day: int = DEFAULT_EVAL_DAY,
              params: AnfParams | None = None,
              analysis_window: tuple[float, float] = DEFAULT_ANALYSIS_WINDOW_H,
              screen: bool = True,
              ratio_threshold: float = RATIO_THRESHOLD,
              activity_floor: float = ACTIVITY_FLOOR) -> PrcCurve:
    """Assemble a PRC from per-CP stimulated groups and one control group.

    Each group is screened (unless ``screen`` is False, for data already
    curated or deliberately corrupted), averaged, and measured against
    the control group mean on ``eval_day``; per-fly measurements against
    the same control mean feed the dispersion.  A stimulated group whose
    screening leaves zero flies is omitted with a warning record; an
    empty control is an error since every comparison needs the anchor.
    """
    if method not in ("anf", "acrophase"):
        raise DataError(f"method must be 'anf' or 'acrophase', got {method!r}")
    params = params if params is not None else AnfParams()
    warnings: list[str] = []

    def included(group: TraceGroup, label: str) -> TraceGroup:
        if not screen:
            return group
        report = screen_flies(group, analysis_window,
                              activity_floor=activity_floor,
                              ratio_threshold=ratio_threshold)
        for cid, reason in report.excluded:
            warnings.append(f"{label}: excluded {cid} ({reason})")
        return group.subset(report.included)

    control_inc = included(control, "control")
    if len(control_inc) == 0:
        raise DataError("screening excluded every control fly")
    control_mean, _ = average_traces(control_inc)

    if method == "anf":
        _, control_fly_shifts, control_ref = _anf_shifts(
            control_inc, control_mean, None, params, analysis_window, eval_day)
    else:
        _, control_fly_shifts, control_ref = _acro_shifts(
            control_inc, control_mean, None, analysis_window, eval_day)
    var_control = _variance(control_fly_shifts)

    points: list[PrcPoint] = []
    for cp in sorted(scenarios):
        label = f"cp={cp:g}"
        group_inc = included(scenarios[cp], label)
        if len(group_inc) == 0:
            warnings.append(f"{label}: omitted (no flies passed screening)")
            continue
        group_mean, _ = average_traces(group_inc)
        if method == "anf":
            shift, fly_shifts, _ = _anf_shifts(
                group_inc, group_mean, control_ref, params, analysis_window, eval_day)
        else:
            shift, fly_shifts, _ = _acro_shifts(
                group_inc, group_mean, control_ref, analysis_window, eval_day)
        sd = math.sqrt(_variance(fly_shifts) + var_control)
        points.append(PrcPoint(cp_h=float(cp) % 24.0, shift_h=shift, sd_h=sd))

    return PrcCurve(method=method, points=tuple(points), eval_day=eval_day,
                    warnings=tuple(warnings))
