"""Figure rendering for the report path (PNG files next to the CSVs).

matplotlib is imported lazily inside each function with the Agg
backend forced, so headless runs work and the import cost is only paid
when figures are requested.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .anf import PhaseSeries
from .core import DataError
from .periodogram import CIRCADIAN_BAND_H, PeriodogramResult
from .prc import PrcCurve

__all__ = [
    "render_actogram",
    "render_phase",
    "render_periodogram",
    "render_prc",
]


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def render_actogram(matrix: np.ndarray, path, title: str = "",
                    fold_period_h: float = 24.0) -> None:
    """Double-plotted actogram raster: one row per period, bars for counts."""
    if matrix.ndim != 2:
        raise DataError("actogram matrix must be 2-D")
    plt = _plt()
    rows, cols = matrix.shape
    fig, ax = plt.subplots(figsize=(8, max(2.0, 0.28 * rows)))
    t = np.linspace(0.0, 2.0 * fold_period_h, cols, endpoint=False)
    peak = float(matrix.max()) or 1.0
    for i in range(rows):
        base = rows - 1 - i
        ax.fill_between(t, base, base + np.clip(matrix[i] / peak, 0.0, 1.0) * 0.95,
                        step="post", color="black", linewidth=0)
    ax.axvline(fold_period_h, color="0.6", linewidth=0.8)
    ax.set_xlim(0, 2 * fold_period_h)
    ax.set_ylim(0, rows)
    ax.set_yticks(np.arange(rows) + 0.5,
                  labels=[str(rows - i) for i in range(rows)])
    ax.set_xlabel(f"time (h, double-plotted, folded at {fold_period_h:g} h)")
    ax.set_ylabel("day")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)


def render_phase(series: PhaseSeries | list[PhaseSeries], path,
                 title: str = "") -> None:
    """Instantaneous period and detrended phase, stacked panels."""
    items = series if isinstance(series, list) else [series]
    if not items:
        raise DataError("nothing to plot")
    plt = _plt()
    fig, (ax_p, ax_ph) = plt.subplots(2, 1, sharex=True, figsize=(8, 5))
    for s in items:
        days = s.times_h / 24.0
        ax_p.plot(days, s.period_h, linewidth=0.9, label=s.channel_id or None)
        if s.phase_defined:
            ax_ph.plot(days, s.phase_h, linewidth=0.9)
    ax_p.set_ylabel("period (h)")
    ax_ph.set_ylabel("phase (h)")
    ax_ph.set_xlabel("day")
    if any(s.channel_id for s in items) and len(items) <= 12:
        ax_p.legend(fontsize="x-small", ncols=2)
    if title:
        ax_p.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)


def render_periodogram(result: PeriodogramResult, path, title: str = "") -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(result.periods_h, result.power, linewidth=0.9)
    ax.axvspan(*CIRCADIAN_BAND_H, color="0.92")
    if np.isfinite(result.dominant_period_h):
        ax.axvline(result.dominant_period_h, color="C3", linewidth=0.8,
                   label=f"dominant {result.dominant_period_h:.2f} h "
                         f"(ratio {result.power_ratio:.1f})")
        ax.legend(fontsize="small")
    ax.set_xlim(10, 40)
    ax.set_xlabel("period (h)")
    ax.set_ylabel("power")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)


def render_prc(curves: PrcCurve | list[PrcCurve], path, title: str = "",
               reference: tuple[np.ndarray, np.ndarray] | None = None) -> None:
    """PRC points with error bars; optional reference curve overlay."""
    items = curves if isinstance(curves, list) else [curves]
    if not items:
        raise DataError("nothing to plot")
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    if reference is not None:
        ref_cp, ref_shift = reference
        ax.plot(ref_cp, ref_shift, color="0.7", linewidth=1.2, label="programmed")
    for i, curve in enumerate(items):
        ax.errorbar(curve.cp_values(), curve.shifts(), yerr=curve.sds(),
                    marker="o", capsize=3, linewidth=1.0, color=f"C{i}",
                    label=f"{curve.method} (day {curve.eval_day})")
    ax.axhline(0.0, color="0.85", linewidth=0.8)
    ax.set_xlim(-0.5, 24.0)
    ax.set_xticks(range(0, 25, 3))
    ax.set_xlabel("circadian phase of pulse (h)")
    ax.set_ylabel("phase shift (h, advance positive)")
    ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=150)
    plt.close(fig)
