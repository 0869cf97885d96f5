"""File I/O: monitor files in, traces and analysis products out.

Monitor file layout (fixed, documented here; writers and parsers in
this module are the format's single source of truth): one reading per
line, tab-separated,

    reading_index  date  time  status_code  light_flag  c1 ... c32

with exactly 32 count columns (one per channel), ``status_code`` 1 for
a normal reading, and ``light_flag`` the light-sensor reading in lux
(0 in darkness).  The timestamp (``date`` as YYYY-MM-DD or "DD Mon YY",
``time`` as HH:MM:SS) marks the END of the bin the counts were summed
over, matching hardware that transmits after each bin closes; the first
trace bin therefore starts one bin width before the first timestamp.
Lines with extra trailing columns are accepted (extras ignored, with a
warning); missing timestamps are zero-filled and reported as gaps —
nothing is ever silently dropped.

CSV traces carry a ``time_h`` column (bin end, hours) plus one column
per channel; floats are written with ``repr`` so every value round-trips
bit-exactly (scientific notation included).

Every analysis product written by ``write_series`` gets a
``<name>.meta.json`` sidecar holding the parameters that produced it
(estimator settings, seeds, package version) — enough to rerun the
computation, with no wall-clock timestamps so outputs stay byte-stable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta
from importlib import metadata as _im
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .anf import AnfParams, PhaseSeries
from .core import ActivityTrace, DataError, LightSchedule, TraceGroup, light_at
from .cosinor import AcrophaseTrack
from .periodogram import PeriodogramResult, ScreeningReport
from .prc import PrcCurve, PrcPoint

__all__ = [
    "DAM_CHANNELS",
    "CsvLayout",
    "Gap",
    "DamParseResult",
    "parse_dam",
    "write_dam",
    "parse_csv",
    "write_traces_csv",
    "write_series",
    "write_table",
    "read_phase_series",
    "read_prc_csv",
    "package_version",
]

DAM_CHANNELS = 32
_DAM_COLUMNS = 5 + DAM_CHANNELS

_DATE_FORMATS = ("%Y-%m-%d", "%d %b %y")
_TIME_FORMAT = "%H:%M:%S"


def package_version() -> str:
    try:
        return _im.version("circatrack")
    except _im.PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class Gap:
    """A span of missing readings, zero-filled on ingest."""

    start_h: float   # hours since trace start (first missing bin's start)
    end_h: float     # hours since trace start (last missing bin's end)
    n_bins: int


@dataclass(frozen=True)
class DamParseResult:
    group: TraceGroup
    schedule: LightSchedule
    gaps: tuple[Gap, ...] = ()
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class CsvLayout:
    """Grid metadata a bare CSV cannot carry by itself."""

    bin_minutes: int = 1
    t0: str = "2024-01-01T08:00:00"
    time_column: str = "time_h"


def _open_for(stream_or_path, mode: str) -> tuple[IO[str], bool]:
    if hasattr(stream_or_path, "read" if "r" in mode else "write"):
        return stream_or_path, False
    return open(stream_or_path, mode, encoding="utf-8", newline=""), True


def _parse_timestamp(date_s: str, time_s: str, line_no: int) -> datetime:
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(f"{date_s} {time_s}", f"{fmt} {_TIME_FORMAT}")
        except ValueError:
            continue
    raise DataError(f"line {line_no}: unparseable timestamp {date_s!r} {time_s!r}")


def _parse_count(token: str, line_no: int, col: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"line {line_no}: non-numeric count {token!r} in column {col}") from None


def parse_dam(stream_or_path, label: str | None = None) -> DamParseResult:
    """Parse a monitor file into 32 traces plus the recorded light schedule.

    The light schedule is reconstructed from ``light_flag`` runs: each
    maximal run of consecutive bins with the same nonzero flag becomes
    one interval at that lux (wavelength reported as "recorded").  Gaps
    break runs, since the sensor state during a gap is unknown.
    """
    stream, should_close = _open_for(stream_or_path, "r")
    if label is None:
        name = getattr(stream_or_path, "name", None) or getattr(stream, "name", "dam")
        label = Path(str(name)).stem
    try:
        timestamps: list[datetime] = []
        lights: list[float] = []
        counts: list[list[float]] = []
        warnings: list[str] = []
        warned_extra = False
        for line_no, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < _DAM_COLUMNS:
                raise DataError(
                    f"line {line_no}: expected {_DAM_COLUMNS} columns "
                    f"(index, date, time, status, light_flag, {DAM_CHANNELS} counts), "
                    f"got {len(fields)}"
                )
            if len(fields) > _DAM_COLUMNS and not warned_extra:
                warnings.append(
                    f"line {line_no}: {len(fields) - _DAM_COLUMNS} extra column(s) ignored "
                    "(accepting first 32 count columns by position)"
                )
                warned_extra = True
            ts = _parse_timestamp(fields[1], fields[2], line_no)
            try:
                int(fields[0]), int(fields[3])
            except ValueError:
                raise DataError(
                    f"line {line_no}: reading index and status must be integers"
                ) from None
            light = _parse_count(fields[4], line_no, 5)
            row = [_parse_count(tok, line_no, 6 + i)
                   for i, tok in enumerate(fields[5:_DAM_COLUMNS])]
            timestamps.append(ts)
            lights.append(light)
            counts.append(row)
    finally:
        if should_close:
            stream.close()

    if not counts:
        raise DataError("monitor file holds no readings")

    if len(timestamps) >= 2:
        step = timestamps[1] - timestamps[0]
        step_min = step.total_seconds() / 60.0
        if step_min <= 0:
            raise DataError("line 2: timestamps must be strictly increasing")
        if abs(step_min - round(step_min)) > 1e-9 or round(step_min) < 1:
            raise DataError(f"bin width must be a whole number of minutes, got {step_min} min")
        bin_minutes = int(round(step_min))
    else:
        bin_minutes = 1
        warnings.append("single reading: assuming 1-minute bins")
    step = timedelta(minutes=bin_minutes)

    # Zero-fill missing readings; every inserted span is reported.
    gaps: list[Gap] = []
    filled_counts: list[list[float]] = [counts[0]]
    filled_lights: list[float | None] = [lights[0]]
    for i in range(1, len(timestamps)):
        delta = timestamps[i] - timestamps[i - 1]
        n_steps = delta / step
        if n_steps <= 0:
            raise DataError(
                f"non-monotone timestamps: reading {i + 1} at {timestamps[i]} "
                f"does not follow {timestamps[i - 1]}"
            )
        if abs(n_steps - round(n_steps)) > 1e-9:
            raise DataError(
                f"reading {i + 1} at {timestamps[i]} is off the {bin_minutes}-minute grid"
            )
        missing = int(round(n_steps)) - 1
        if missing > 0:
            done = len(filled_counts)
            gaps.append(Gap(
                start_h=done * bin_minutes / 60.0,
                end_h=(done + missing) * bin_minutes / 60.0,
                n_bins=missing,
            ))
            filled_counts.extend([[0.0] * DAM_CHANNELS] * missing)
            filled_lights.extend([None] * missing)
        filled_counts.append(counts[i])
        filled_lights.append(lights[i])

    matrix = np.asarray(filled_counts)
    dt_h = bin_minutes / 60.0
    t0 = (timestamps[0] - step).isoformat()
    traces = tuple(
        ActivityTrace(channel_id=f"{label}:{ch + 1:02d}", t0=t0,
                      bin_minutes=bin_minutes, values=matrix[:, ch])
        for ch in range(DAM_CHANNELS)
    )

    intervals: list[tuple[float, float, float, str]] = []
    run_start = None
    run_lux = 0.0
    for i, lux in enumerate(filled_lights + [None]):
        if run_start is not None and (lux is None or lux != run_lux):
            if run_lux > 0:
                intervals.append((run_start * dt_h, i * dt_h, run_lux, "recorded"))
            run_start = None
        if lux is not None and lux > 0 and run_start is None:
            run_start, run_lux = i, lux

    return DamParseResult(
        group=TraceGroup(traces=traces, label=label),
        schedule=LightSchedule(intervals=tuple(intervals)),
        gaps=tuple(gaps),
        warnings=tuple(warnings),
    )


def _format_value(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(float(x))


def write_dam(stream_or_path, group: TraceGroup,
              schedule: LightSchedule | None = None) -> None:
    """Write a group as a monitor file (layout in the module docstring).

    Groups smaller than 32 channels are padded with all-zero channels;
    larger groups are rejected.  The light schedule, when given, is
    encoded into ``light_flag`` as integer lux at each bin start.
    """
    if len(group) == 0:
        raise DataError("cannot write an empty group")
    if len(group) > DAM_CHANNELS:
        raise DataError(f"monitor files hold {DAM_CHANNELS} channels, group has {len(group)}")
    ref = group.traces[0]
    t0 = datetime.fromisoformat(ref.t0)
    step = timedelta(minutes=ref.bin_minutes)
    matrix = np.zeros((ref.n_bins, DAM_CHANNELS))
    matrix[:, :len(group)] = group.matrix().T

    stream, should_close = _open_for(stream_or_path, "w")
    try:
        for i in range(ref.n_bins):
            ts = t0 + (i + 1) * step
            lux = light_at(schedule, i * ref.dt_h) if schedule is not None else 0.0
            fields = [str(i + 1), ts.strftime("%Y-%m-%d"), ts.strftime(_TIME_FORMAT),
                      "1", str(int(round(lux)))]
            fields.extend(_format_value(v) for v in matrix[i])
            stream.write("\t".join(fields) + "\n")
    finally:
        if should_close:
            stream.close()


def parse_csv(stream_or_path, layout: CsvLayout = CsvLayout(),
              label: str = "") -> TraceGroup:
    """Parse a trace CSV: header row of channel names, one row per bin.

    A leading ``layout.time_column`` column, if present, supplies the
    bin width (its values are bin-end hours); otherwise the layout's
    ``bin_minutes`` applies.  Rows must be rectangular and numeric.
    """
    stream, should_close = _open_for(stream_or_path, "r")
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("CSV is empty (no header row)") from None
        has_time = bool(header) and header[0] == layout.time_column
        names = header[1:] if has_time else header
        if not names:
            raise DataError("CSV header names no channels")
        rows: list[list[float]] = []
        times: list[float] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"line {line_no}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                vals = [float(tok) for tok in row]
            except ValueError as exc:
                raise DataError(f"line {line_no}: non-numeric cell ({exc})") from None
            if has_time:
                times.append(vals[0])
                vals = vals[1:]
            rows.append(vals)
    finally:
        if should_close:
            stream.close()

    if not rows:
        raise DataError("CSV has a header but no data rows")
    bin_minutes = layout.bin_minutes
    if has_time and len(times) >= 2:
        dt_min = (times[1] - times[0]) * 60.0
        if dt_min <= 0 or abs(dt_min - round(dt_min)) > 1e-6:
            raise DataError(f"time column step must be whole positive minutes, got {dt_min} min")
        bin_minutes = int(round(dt_min))
    matrix = np.asarray(rows)
    traces = tuple(
        ActivityTrace(channel_id=name, t0=layout.t0, bin_minutes=bin_minutes,
                      values=matrix[:, i])
        for i, name in enumerate(names)
    )
    return TraceGroup(traces=traces, label=label)


def write_traces_csv(path, group: TraceGroup,
                     extra_meta: dict | None = None) -> None:
    """Write a group as CSV (with time column) plus a grid-metadata sidecar."""
    if len(group) == 0:
        raise DataError("cannot write an empty group")
    ref = group.traces[0]
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_h"] + group.channel_ids())
        times = ref.times_h()
        matrix = group.matrix()
        for i in range(ref.n_bins):
            writer.writerow([repr(float(times[i]))]
                            + [_format_value(v) for v in matrix[:, i]])
    _write_meta(path, {
        "kind": "traces",
        "label": group.label,
        "t0": ref.t0,
        "bin_minutes": ref.bin_minutes,
        "n_bins": ref.n_bins,
        "channels": group.channel_ids(),
    }, extra_meta)


def _write_meta(path: Path, meta: dict, extra_meta: dict | None = None) -> None:
    meta = dict(meta)
    meta["package_version"] = package_version()
    if extra_meta:
        meta.update(extra_meta)
    sidecar = path.with_name(path.name + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")


def write_table(path, header: Sequence[str], rows: Iterable[Sequence],
                meta: dict, extra_meta: dict | None = None) -> None:
    """CSV + metadata sidecar for ad-hoc tables (used by the CLI)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([
                _format_value(c) if isinstance(c, (int, float, np.floating, np.integer))
                and not isinstance(c, bool) else str(c)
                for c in row
            ])
    _write_meta(path, meta, extra_meta)


def write_series(path, obj, extra_meta: dict | None = None) -> None:
    """Write an analysis product as CSV with a .meta.json sidecar.

    Accepts PhaseSeries, PeriodogramResult, PrcCurve, ScreeningReport,
    AcrophaseTrack, or a bare actogram matrix (2-D array).
    """
    path = Path(path)
    if isinstance(obj, PhaseSeries):
        header = ["time_h", "argument_rad", "omega_rad_per_h", "period_h", "phase_h"]
        rows = zip(obj.times_h, obj.argument_rad, obj.omega_rad_per_h,
                   obj.period_h, obj.phase_h)
        meta = {
            "kind": "phase_series",
            "channel_id": obj.channel_id,
            "phase_defined": obj.phase_defined,
            "trend_alpha_rad": _json_float(obj.trend_alpha_rad),
            "trend_beta_rad_per_h": _json_float(obj.trend_beta_rad_per_h),
            "anf_params": asdict(obj.params) if obj.params is not None else None,
        }
    elif isinstance(obj, PeriodogramResult):
        header = ["period_h", "power"]
        rows = zip(obj.periods_h, obj.power)
        meta = {
            "kind": "periodogram",
            "dominant_period_h": _json_float(obj.dominant_period_h),
            "power_ratio": _json_float(obj.power_ratio),
            "rhythmic": obj.rhythmic,
        }
    elif isinstance(obj, PrcCurve):
        header = ["cp_h", "shift_h", "sd_h", "method"]
        rows = [(p.cp_h, p.shift_h, p.sd_h, obj.method) for p in obj.points]
        meta = {
            "kind": "prc",
            "method": obj.method,
            "eval_day": obj.eval_day,
            "n_points": len(obj.points),
            "warnings": list(obj.warnings),
        }
    elif isinstance(obj, ScreeningReport):
        header = ["channel_id", "included", "reason"]
        rows = ([(cid, True, "") for cid in obj.included]
                + [(cid, False, reason) for cid, reason in obj.excluded])
        meta = {
            "kind": "screening",
            "inclusion_ratio": _json_float(obj.inclusion_ratio),
            "n_included": len(obj.included),
            "n_excluded": len(obj.excluded),
        }
    elif isinstance(obj, AcrophaseTrack):
        header = ["day_index", "acrophase_abs_h"]
        rows = zip(obj.day_index, obj.acrophase_abs_h)
        meta = {
            "kind": "acrophase_track",
            "slope_h_per_day": obj.slope_h_per_day,
            "tau_h": obj.tau_h,
            "intercept_h": obj.intercept_h,
            "valid": obj.valid,
        }
    elif isinstance(obj, np.ndarray) and obj.ndim == 2:
        header = [f"c{j}" for j in range(obj.shape[1])]
        rows = obj
        meta = {"kind": "actogram", "shape": list(obj.shape)}
    else:
        raise DataError(f"write_series does not handle {type(obj).__name__}")

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                _format_row_cell(c) for c in row
            ])
    _write_meta(path, meta, extra_meta)


def _format_row_cell(c) -> str:
    if isinstance(c, bool):
        return str(c)
    if isinstance(c, (float, np.floating)):
        return repr(float(c))
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return str(c)


def _json_float(x: float):
    # JSON has no NaN/Inf literals; encode them as strings.
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def read_phase_series(path) -> PhaseSeries:
    """Read back a PhaseSeries written by ``write_series`` (exact values)."""
    path = Path(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    sidecar = path.with_name(path.name + ".meta.json")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    params = AnfParams(**meta["anf_params"]) if meta.get("anf_params") else None
    return PhaseSeries(
        times_h=np.atleast_1d(data["time_h"]),
        argument_rad=np.atleast_1d(data["argument_rad"]),
        omega_rad_per_h=np.atleast_1d(data["omega_rad_per_h"]),
        period_h=np.atleast_1d(data["period_h"]),
        phase_h=np.atleast_1d(data["phase_h"]),
        channel_id=meta.get("channel_id", ""),
        phase_defined=bool(meta.get("phase_defined", True)),
        trend_alpha_rad=float(meta.get("trend_alpha_rad", "nan")),
        trend_beta_rad_per_h=float(meta.get("trend_beta_rad_per_h", "nan")),
        params=params,
    )


def read_prc_csv(path) -> PrcCurve:
    """Read back a PRC curve written by ``write_series``."""
    path = Path(path)
    points: list[PrcPoint] = []
    methods: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"cp_h", "shift_h", "sd_h"} <= set(reader.fieldnames):
            raise DataError(f"{path}: not a PRC CSV (need cp_h, shift_h, sd_h columns)")
        for row in reader:
            points.append(PrcPoint(cp_h=float(row["cp_h"]), shift_h=float(row["shift_h"]),
                                   sd_h=float(row["sd_h"])))
            methods.add(row.get("method", "") or "anf")
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        method = meta.get("method", "anf")
        eval_day = int(meta.get("eval_day", 10))
        warnings = tuple(meta.get("warnings", ()))
    else:
        if len(methods) > 1:
            raise DataError(f"{path}: mixed methods in one PRC CSV")
        method = methods.pop() if methods else "anf"
        eval_day, warnings = 10, ()
    points.sort(key=lambda p: p.cp_h)
    return PrcCurve(method=method, points=tuple(points), eval_day=eval_day,
                    warnings=warnings)
