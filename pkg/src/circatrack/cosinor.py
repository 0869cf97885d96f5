"""Cosine fitting baseline: acrophase, daily tracking, and actograms.

The acrophase of a window is the peak time of the least-squares cosine

    y ~= M + A*cos(2*pi*(t - a)/P)

fitted through the linear parametrization ``M + B*cos(2*pi*t/P) +
C*sin(2*pi*t/P)``, so ``A = hypot(B, C)`` and the peak falls at
``a = P/(2*pi) * atan2(C, B)`` (mod P).  Daily acrophases on nominal
24 h windows drift by ``tau - 24`` hours per day for a free-running
rhythm of period ``tau``; an ordinary least-squares line through them
recovers that drift, hence ``tau = 24 + slope``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ActivityTrace, DataError

__all__ = [
    "CosinorFit",
    "AcrophaseTrack",
    "cosinor_fit",
    "daily_acrophases",
    "actogram_export",
]


@dataclass(frozen=True)
class CosinorFit:
    mesor: float
    amplitude: float
    acrophase_h: float        # peak time in [0, period_h); NaN when undefined
    period_h: float
    rss: float
    acrophase_defined: bool = True


@dataclass(frozen=True)
class AcrophaseTrack:
    """Daily acrophases on the actogram timeline plus their regression.

    ``acrophase_abs_h`` holds absolute peak times (hours from t0),
    unwrapped so consecutive days differ by less than 12 h on the daily
    clock.  ``day_index`` uses 1-based protocol days (day N covers
    [24*(N-1), 24*N) hours).  ``valid`` flags a regression whose
    implied period lies in the physiological 18-30 h range.
    """

    day_index: np.ndarray
    acrophase_abs_h: np.ndarray
    slope_h_per_day: float
    tau_h: float
    intercept_h: float
    valid: bool

    def predicted_clock_h(self, day: float) -> float:
        """Regression-predicted daily peak time (hours past each midnight)."""
        return self.intercept_h + self.slope_h_per_day * day


def cosinor_fit(trace: ActivityTrace, window: tuple[float, float],
                period_h: float) -> CosinorFit:
    """Least-squares single-component cosine fit over ``window``."""
    if period_h <= 0:
        raise DataError(f"period_h must be > 0, got {period_h}")
    t0, t1 = window
    if t1 - t0 < period_h:
        raise DataError(
            f"cosinor window must span one full period ({period_h} h), got {t1 - t0} h"
        )
    centers = trace.centers_h()
    mask = (centers >= t0) & (centers < t1)
    t = centers[mask]
    y = trace.values[mask]
    if len(t) < 3:
        raise DataError("cosinor window holds fewer than 3 bins")

    if np.ptp(y) == 0.0:
        return CosinorFit(mesor=float(y[0]), amplitude=0.0, acrophase_h=math.nan,
                          period_h=period_h, rss=0.0, acrophase_defined=False)

    ang = 2.0 * math.pi * t / period_h
    design = np.column_stack([np.ones_like(t), np.cos(ang), np.sin(ang)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    mesor, b, c = (float(v) for v in coef)
    resid = y - design @ coef
    rss = float(np.dot(resid, resid))
    amplitude = math.hypot(b, c)
    if amplitude == 0.0:
        return CosinorFit(mesor=mesor, amplitude=0.0, acrophase_h=math.nan,
                          period_h=period_h, rss=rss, acrophase_defined=False)
    acro = (period_h / (2.0 * math.pi)) * math.atan2(c, b) % period_h
    return CosinorFit(mesor=mesor, amplitude=amplitude, acrophase_h=acro,
                      period_h=period_h, rss=rss)


def daily_acrophases(trace: ActivityTrace, nominal_period_h: float = 24.0,
                     window: tuple[float, float] | None = None) -> AcrophaseTrack:
    """Track the daily peak across consecutive 24 h actogram rows.

    Days are nominal 24 h slices from the trace start (standard
    actogram rows); restrict with ``window`` to skip entrained or
    stimulus days when measuring a free-running period.  Days with an
    undefined acrophase are dropped; fewer than 3 valid days is an
    error.
    """
    t_lo, t_hi = window if window is not None else (0.0, trace.duration_hours)
    first_day = int(math.ceil(t_lo / 24.0 - 1e-9))
    last_day = int(math.floor(t_hi / 24.0 + 1e-9))
    if last_day - first_day < 3:
        raise DataError(
            f"need >= 3 full days between {t_lo} h and {t_hi} h, "
            f"got {last_day - first_day}"
        )

    days: list[int] = []
    clock: list[float] = []
    for d in range(first_day, last_day):
        start = 24.0 * d
        fit = cosinor_fit(trace, (start, start + 24.0), nominal_period_h)
        if not fit.acrophase_defined:
            continue
        candidate = fit.acrophase_h  # peak time within the day, [0, 24)
        if clock:
            # Stay within +-12 h of the previous day's peak on the daily clock.
            candidate += 24.0 * round((clock[-1] - candidate) / 24.0)
        days.append(d + 1)  # 1-based protocol day numbering
        clock.append(candidate)
    if len(days) < 3:
        raise DataError(f"only {len(days)} days with a defined acrophase; need >= 3")

    day_arr = np.asarray(days, dtype=float)
    clock_arr = np.asarray(clock)
    slope, intercept = np.polyfit(day_arr, clock_arr, 1)
    tau = 24.0 + float(slope)
    return AcrophaseTrack(
        day_index=np.asarray(days),
        acrophase_abs_h=24.0 * (day_arr - 1.0) + clock_arr,
        slope_h_per_day=float(slope),
        tau_h=tau,
        intercept_h=float(intercept),
        valid=bool(18.0 <= tau <= 30.0),
    )


def actogram_export(trace: ActivityTrace,
                    fold_period_h: float = 24.0) -> tuple[np.ndarray, bool]:
    """Double-plotted actogram matrix: row i holds periods i and i+1.

    Returns ``(matrix, padded)`` where ``matrix`` has one row per fold
    period and ``2 * bins_per_period`` columns; ``padded`` flags a trace
    length that is not a whole number of fold periods (missing bins are
    zero-filled, values otherwise untouched).
    """
    if fold_period_h <= 0:
        raise DataError(f"fold_period_h must be > 0, got {fold_period_h}")
    bins_per = int(round(fold_period_h / trace.dt_h))
    if bins_per < 1:
        raise DataError("fold period shorter than one bin")
    n = trace.n_bins
    rows = max(1, math.ceil(n / bins_per))
    padded = n % bins_per != 0
    flat = np.zeros((rows + 1) * bins_per)
    flat[:n] = trace.values
    out = np.empty((rows, 2 * bins_per))
    for i in range(rows):
        out[i] = flat[i * bins_per:(i + 2) * bins_per]
    return out, padded
