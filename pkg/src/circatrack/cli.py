"""Command-line pipeline: generate, screen, estimate, baseline, PRC, compare.

Subcommands
-----------
synth      render a scenario (JSON) into monitor files + ground truth
screen     rhythmicity screening with periodogram power ratios
estimate   online phase/period tracking per channel
cosinor    daily-acrophase baseline (cosine fits + regression)
prc        phase-response curves from pulsed groups vs a control group
corrupt    add Gaussian noise to traces (analysis-robustness experiments)
compare    difference tables between PRC files

Configuration resolves in three layers: built-in defaults < values from
a JSON config file (``--config``, flat keys named like the long flags
with dashes as underscores) < explicit flags.  The output directory
additionally honors the ``CIRCATRACK_OUT`` environment variable
(flags > environment > config > default ".").

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data error, 3 numerical failure.

Every CSV written here gets a ``.meta.json`` sidecar recording the
resolved settings and seeds that produced it, so any output can be
regenerated from its sidecar alone.  With ``--figures``, commands also
render PNG summaries next to the delimited output.

Scenario files (``synth``) are JSON:

    {
      "days": 12, "bin_minutes": 1, "tau_h": 24.45, "seed": 20240101,
      "ld_days": 3, "photoperiod_h": 12.0, "ld_lux": 100.0,
      "pulse_lux": 4.0, "pulse_duration_h": 1.0, "pulse_wavelength": "470nm",
      "cohort": {"n_flies": 21, "rhythmic_fraction": 1.0, "period_sd_h": 0.05,
                 "phase0_sd_h": 0.0, "amplitude_cv": 0.1, "bias_cv": 0.1},
      "waveform": {"bias_d": 5.0, "harmonics": [[1, 4.0, 0.0], [2, 2.0, 1.5708]],
                   "masking_gain": 2.0, "count_model": "poisson"},
      "prc_program": {"sinusoid": {"amplitude_h": 2.0, "zero_cp_h": 0.0}},
      "incubators": [{"label": "control-1", "pulse_cp_h": null},
                     {"label": "cp00", "pulse_cp_h": 0.0}, ...]
    }

``prc_program`` alternatively takes {"table": {"cp_h": [...], "shift_h":
[...]}}.  Omitting ``--scenario`` uses the built-in nine-incubator
protocol: two pulse-free controls plus pulses at CP 0, 3, 6, 9, 12, 15
and 20 (all after three days of 12:12 entrainment, then free run).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .anf import AnfParams, run_group
from .core import DataError, LightSchedule, NumericalError, TraceGroup, average_traces
from .cosinor import actogram_export, daily_acrophases
from .ingest import (
    CsvLayout,
    package_version,
    parse_csv,
    parse_dam,
    read_prc_csv,
    write_dam,
    write_series,
    write_table,
    write_traces_csv,
)
from .periodogram import (
    ACTIVITY_FLOOR,
    RATIO_THRESHOLD,
    ScreeningReport,
    periodogram,
    screen_flies,
)
from .prc import DEFAULT_ANALYSIS_WINDOW_H, DEFAULT_EVAL_DAY, build_prc, wrap12
from .synth import Cohort, PrcProgram, SynthSpec, corrupt, generate_cohort, ld_dd_schedule

__all__ = ["main", "default_scenario"]

PROTOCOL_CPS = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 20.0)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration plumbing


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


class Settings:
    """Three-layer lookup (flag > config > default) that records itself."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config
        self.resolved: dict = {}

    def get(self, key: str, default):
        flag = getattr(self._args, key, None)
        if flag is not None:
            value = flag
        elif key in self._config:
            value = self._config[key]
        else:
            value = default
        self.resolved[key] = value
        return value

    def out_dir(self) -> Path:
        flag = getattr(self._args, "out", None)
        env = os.environ.get("CIRCATRACK_OUT")
        value = flag or env or self._config.get("out") or "."
        self.resolved["out"] = str(value)
        out = Path(value)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def anf_params(self) -> AnfParams:
        defaults = AnfParams()
        period_init = self.get("period_init", 2.0 * math.pi / defaults.omega_init)
        return AnfParams(
            zeta=self.get("zeta", defaults.zeta),
            gamma_omega=self.get("gamma_omega", defaults.gamma_omega),
            omega_init=2.0 * math.pi / period_init,
            substeps_per_bin=int(self.get("substeps", defaults.substeps_per_bin)),
        )

    def window(self) -> tuple[float, float]:
        lo = self.get("window_start", DEFAULT_ANALYSIS_WINDOW_H[0])
        hi = self.get("window_end", DEFAULT_ANALYSIS_WINDOW_H[1])
        return float(lo), float(hi)

    def meta(self, command: str) -> dict:
        return {"command": command, "settings": dict(sorted(self.resolved.items()))}


def _default_window_for(duration_h: float, window: tuple[float, float],
                        explicit: bool) -> tuple[float, float]:
    """Clamp the default analysis window to short traces (explicit windows
    are passed through untouched and may still error downstream)."""
    if explicit:
        return window
    lo, hi = window
    if duration_h < hi:
        span = hi - lo
        return max(0.0, duration_h - span), duration_h
    return lo, hi


def _safe_name(channel_id: str) -> str:
    return channel_id.replace(":", "_").replace("/", "_")


def _load_inputs(paths: list[str], args) -> list:
    """Parse each input file (monitor TSV or CSV) into a DamParseResult-like
    bundle; gap reports and format warnings go to stderr, never dropped."""
    results = []
    for p in paths:
        path = Path(p)
        if not path.exists():
            raise DataError(f"input file not found: {path}")
        if path.suffix.lower() == ".csv":
            layout = CsvLayout(bin_minutes=int(getattr(args, "bin_minutes", None) or 1),
                               t0=getattr(args, "t0", None) or CsvLayout().t0)
            sidecar = path.with_name(path.name + ".meta.json")
            if sidecar.exists():
                meta = json.loads(sidecar.read_text(encoding="utf-8"))
                layout = CsvLayout(bin_minutes=int(meta.get("bin_minutes", layout.bin_minutes)),
                                   t0=meta.get("t0", layout.t0))
            group = parse_csv(path, layout=layout, label=path.stem)
            results.append((group, None))
        else:
            parsed = parse_dam(path)
            for gap in parsed.gaps:
                print(f"note: {path.name}: gap of {gap.n_bins} bin(s) at "
                      f"{gap.start_h:.3f}-{gap.end_h:.3f} h zero-filled", file=sys.stderr)
            for w in parsed.warnings:
                print(f"note: {path.name}: {w}", file=sys.stderr)
            results.append((parsed.group, parsed.schedule))
    return results


def _merge_groups(groups: list[TraceGroup], label: str) -> TraceGroup:
    traces = tuple(t for g in groups for t in g.traces)
    return TraceGroup(traces=traces, label=label)


# ---------------------------------------------------------------------------
# synth


def default_scenario() -> dict:
    incubators = [{"label": "control-1", "pulse_cp_h": None},
                  {"label": "control-2", "pulse_cp_h": None}]
    incubators += [{"label": f"cp{int(cp):02d}", "pulse_cp_h": cp} for cp in PROTOCOL_CPS]
    return {
        "days": 12,
        "bin_minutes": 1,
        "tau_h": 24.45,
        "seed": 20240101,
        "ld_days": 3,
        "photoperiod_h": 12.0,
        "ld_lux": 100.0,
        "pulse_lux": 4.0,
        "pulse_duration_h": 1.0,
        "pulse_wavelength": "470nm",
        "cohort": {"n_flies": 21, "rhythmic_fraction": 1.0},
        "waveform": {"masking_gain": 2.0},
        "prc_program": {"sinusoid": {"amplitude_h": 2.0, "zero_cp_h": 0.0}},
        "incubators": incubators,
    }


def _scenario_prc_program(block) -> PrcProgram | None:
    if block is None:
        return None
    if "sinusoid" in block:
        return PrcProgram.sinusoid(**block["sinusoid"])
    if "table" in block:
        return PrcProgram(cp_h=tuple(block["table"]["cp_h"]),
                          shift_h=tuple(block["table"]["shift_h"]))
    raise UsageError("prc_program must hold a 'sinusoid' or 'table' block")


def run_scenario(scenario: dict, out: Path, figures: bool = False) -> dict:
    """Materialize a scenario: one monitor file + truth JSON per incubator.

    Returns the manifest (also written to ``out/manifest.json``).
    """
    incubators = scenario.get("incubators")
    if not incubators:
        raise UsageError("scenario lists no incubators")
    days = int(scenario.get("days", 12))
    bin_minutes = int(scenario.get("bin_minutes", 1))
    tau = float(scenario.get("tau_h", 24.45))
    seed = int(scenario.get("seed", 0))
    program = _scenario_prc_program(scenario.get("prc_program"))
    waveform = dict(scenario.get("waveform", {}))
    cohort_block = dict(scenario.get("cohort", {}))
    cohort_block.setdefault("n_flies", 21)
    cohort_block.setdefault("rhythmic_fraction", 1.0)

    entries = []
    for idx, inc in enumerate(incubators):
        label = inc.get("label") or f"incubator-{idx + 1}"
        pulse_cp = inc.get("pulse_cp_h")
        schedule = ld_dd_schedule(
            ld_days=int(scenario.get("ld_days", 3)),
            photoperiod_h=float(scenario.get("photoperiod_h", 12.0)),
            ld_lux=float(scenario.get("ld_lux", 100.0)),
            pulse_cp_h=None if pulse_cp is None else float(pulse_cp),
            period_h=tau,
            pulse_duration_h=float(scenario.get("pulse_duration_h", 1.0)),
            pulse_lux=float(scenario.get("pulse_lux", 4.0)),
            pulse_wavelength=str(scenario.get("pulse_wavelength", "470nm")),
        )
        master = int(np.random.SeedSequence((seed, idx)).generate_state(1, np.uint64)[0])
        try:
            spec = SynthSpec(period_h=tau, prc_program=program, seed=master, **waveform)
            cohort = Cohort(label=label, **cohort_block)
        except TypeError as exc:
            raise UsageError(f"scenario holds an unknown parameter: {exc}") from None
        result = generate_cohort(cohort, spec, schedule, days, bin_minutes)

        dam_path = out / f"{label}.dam"
        write_dam(dam_path, result.group, schedule)
        truth = {
            "label": label,
            "pulse_cp_h": pulse_cp,
            "tau_h": tau,
            "days": days,
            "bin_minutes": bin_minutes,
            "programmed_shift_h": (None if pulse_cp is None or program is None
                                   else program(float(pulse_cp))),
            "schedule": [list(iv) for iv in schedule.intervals],
            "flies": [
                {
                    "channel_id": f"{label}:{i + 1:02d}",
                    "rhythmic": result.rhythmic[i],
                    "period_h": result.specs[i].period_h,
                    "bias_d": result.specs[i].bias_d,
                    "harmonics": [list(h) for h in result.specs[i].harmonics],
                    "seed": result.specs[i].seed,
                }
                for i in range(len(result.group))
            ],
        }
        truth_path = out / f"{label}.truth.json"
        truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
        entries.append({"label": label, "pulse_cp_h": pulse_cp,
                        "file": dam_path.name, "truth_file": truth_path.name})

        if figures:
            from .plots import render_actogram

            mean_trace, _ = average_traces(result.group)
            matrix, _ = actogram_export(mean_trace)
            render_actogram(matrix, out / f"{label}.actogram.png",
                            title=f"{label} (group mean)")

    manifest = {
        "scenario": scenario,
        "incubators": entries,
        "package_version": package_version(),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    if args.scenario is None:
        scenario = default_scenario()
    else:
        try:
            scenario = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read scenario: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"scenario is not valid JSON: {exc}") from None
        if not scenario or not isinstance(scenario, dict):
            raise UsageError("scenario file holds no scenario object")
    if args.seed is not None:
        scenario["seed"] = args.seed
    manifest = run_scenario(scenario, out, figures=bool(settings.get("figures", False)))
    print(f"wrote {len(manifest['incubators'])} incubator file(s) to {out}")
    for entry in manifest["incubators"]:
        cp = entry["pulse_cp_h"]
        kind = "control (no pulse)" if cp is None else f"pulse at CP {cp:g}"
        print(f"  {entry['file']}: {kind}")
    return 0


# ---------------------------------------------------------------------------
# screen


def _load_labels(paths: list[str] | None) -> dict[str, bool]:
    labels: dict[str, bool] = {}
    for p in paths or []:
        data = json.loads(Path(p).read_text(encoding="utf-8"))
        for fly in data.get("flies", []):
            labels[fly["channel_id"]] = bool(fly["rhythmic"])
    return labels


def cmd_screen(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    threshold = float(settings.get("threshold", RATIO_THRESHOLD))
    floor = float(settings.get("activity_floor", ACTIVITY_FLOOR))
    window = settings.window()
    explicit = args.window_start is not None or args.window_end is not None

    loaded = _load_inputs(args.inputs, args)
    included: list[str] = []
    excluded: list[tuple[str, str]] = []
    windows = []
    for group, _ in loaded:
        win = _default_window_for(group.traces[0].duration_hours, window, explicit)
        windows.append(win)
        report = screen_flies(group, win, activity_floor=floor,
                              ratio_threshold=threshold)
        included.extend(report.included)
        excluded.extend(report.excluded)
    total = len(included) + len(excluded)
    ratio = len(included) / total if total else 0.0
    report = ScreeningReport(included=tuple(included), excluded=tuple(excluded),
                             inclusion_ratio=ratio)

    extra = settings.meta("screen")
    extra["window_h"] = [list(w) for w in windows]
    labels = _load_labels(args.labels)
    if labels:
        tp = sum(1 for c in included if labels.get(c, False))
        fp = len(included) - tp
        fn = sum(1 for c, _ in excluded if labels.get(c, False))
        tn = len(excluded) - fn
        accuracy = (tp + tn) / total if total else 0.0
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / (tp + fn) if tp + fn else 1.0
        extra["label_scores"] = {"accuracy": accuracy, "precision": precision,
                                 "recall": recall, "tp": tp, "fp": fp,
                                 "tn": tn, "fn": fn}
        print(f"vs labels: accuracy {accuracy:.3f}, precision {precision:.3f}, "
              f"recall {recall:.3f}")
    write_series(out / "screening.csv", report, extra_meta=extra)
    print(f"screened {total} channel(s): {len(included)} included "
          f"({100 * ratio:.1f}%), {len(excluded)} excluded")

    if settings.get("figures", False):
        from .plots import render_periodogram

        for (group, _), win in zip(loaded, windows):
            mean_trace, _ = average_traces(group)
            result = periodogram(mean_trace, win, ratio_threshold=threshold)
            name = _safe_name(group.label or "group")
            write_series(out / f"{name}.periodogram.csv", result, extra_meta=extra)
            render_periodogram(result, out / f"{name}.periodogram.png",
                               title=f"{group.label} (group mean)")

    if args.sweep:
        try:
            lo, hi, step = (float(x) for x in args.sweep.split(":"))
        except ValueError:
            raise UsageError("--sweep wants LO:HI:STEP") from None
        rows = []
        for th in np.arange(lo, hi + 1e-9, step):
            inc = 0
            for (group, _), win in zip(loaded, windows):
                rep = screen_flies(group, win, activity_floor=floor,
                                   ratio_threshold=float(th))
                inc += len(rep.included)
            rows.append((float(th), inc, inc / total if total else 0.0))
            print(f"  threshold {th:6.2f}: {inc}/{total} included")
        write_table(out / "screening_sweep.csv",
                    ["threshold", "n_included", "inclusion_ratio"], rows,
                    {"kind": "screening_sweep"}, extra_meta=settings.meta("screen"))
    return 0


# ---------------------------------------------------------------------------
# estimate


def _settle_time_h(series) -> float:
    final = series.period_h[-1]
    off = np.abs(series.period_h - final) > 0.1
    if not off.any():
        return float(series.times_h[0])
    last_bad = np.nonzero(off)[0][-1]
    if last_bad + 1 >= len(series.times_h):
        return math.inf
    return float(series.times_h[last_bad + 1])


def cmd_estimate(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    params = settings.anf_params()
    window = settings.window()
    explicit = args.window_start is not None or args.window_end is not None
    loaded = _load_inputs(args.inputs, args)
    workers = int(settings.get("workers", 1))

    want_mean = bool(settings.get("group_mean", False))

    def estimate_group(item):
        group, _ = item
        duration = group.traces[0].duration_hours
        win = _default_window_for(duration, window, explicit)
        traces = list(group.traces)
        names = group.channel_ids()
        if want_mean:
            mean_trace, _ = average_traces(group)
            traces.append(mean_trace)
            names.append(mean_trace.channel_id)
        return group.label, names, run_group(traces, params=params, detrend_window=win)

    if workers > 1 and len(loaded) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(estimate_group, loaded))
    else:
        results = [estimate_group(item) for item in loaded]

    extra = settings.meta("estimate")
    for label, names, series_list in results:
        for name, series in zip(names, series_list):
            write_series(out / f"{_safe_name(name)}.phase.csv", series,
                         extra_meta=extra)
            if series.phase_defined:
                settle = _settle_time_h(series)
                settle_s = f"settled by {settle / 24.0:.2f} d" if math.isfinite(settle) \
                    else "did not settle"
                print(f"  {name}: period {series.period_h[-1]:.3f} h at end, {settle_s}")
            else:
                print(f"  {name}: no rotation detected (phase undefined)")
        if settings.get("figures", False):
            from .plots import render_phase

            render_phase(series_list, out / f"{_safe_name(label or 'group')}.phase.png",
                         title=label)
    return 0


# ---------------------------------------------------------------------------
# cosinor


def cmd_cosinor(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    window = settings.window()
    explicit = args.window_start is not None or args.window_end is not None
    fold = float(settings.get("fold_period", 24.0))
    loaded = _load_inputs(args.inputs, args)
    want_actograms = bool(settings.get("actograms", False))

    extra = settings.meta("cosinor")
    rows = []
    for group, _ in loaded:
        duration = group.traces[0].duration_hours
        win = _default_window_for(duration, window, explicit)
        for trace in group.traces:
            try:
                track = daily_acrophases(trace, window=win)
            except DataError as exc:
                rows.append((trace.channel_id, "", "", False, str(exc)))
                continue
            write_series(out / f"{_safe_name(trace.channel_id)}.acrophase.csv",
                         track, extra_meta=extra)
            rows.append((trace.channel_id, track.tau_h, track.slope_h_per_day,
                         track.valid, ""))
            print(f"  {trace.channel_id}: tau {track.tau_h:.3f} h "
                  f"({'valid' if track.valid else 'out of range'})")
            if want_actograms:
                matrix, padded = actogram_export(trace, fold_period_h=fold)
                write_series(out / f"{_safe_name(trace.channel_id)}.actogram.csv",
                             matrix, extra_meta={**extra, "padded": padded,
                                                 "fold_period_h": fold})
        if settings.get("figures", False):
            from .plots import render_actogram

            mean_trace, _ = average_traces(group)
            matrix, _ = actogram_export(mean_trace, fold_period_h=fold)
            render_actogram(matrix, out / f"{_safe_name(group.label or 'group')}.actogram.png",
                            title=f"{group.label} (group mean)", fold_period_h=fold)
    write_table(out / "cosinor_summary.csv",
                ["channel_id", "tau_h", "slope_h_per_day", "valid", "error"],
                rows, {"kind": "cosinor_summary"}, extra_meta=extra)
    return 0


# ---------------------------------------------------------------------------
# prc


def _groups_from_manifest(manifest_path: Path):
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = manifest_path.parent
    controls, targets = [], {}
    for entry in manifest.get("incubators", []):
        parsed = parse_dam(base / entry["file"])
        cp = entry.get("pulse_cp_h")
        if cp is None:
            controls.append(parsed.group)
        else:
            targets.setdefault(float(cp), []).append(parsed.group)
    reference = None
    program = _scenario_prc_program(manifest.get("scenario", {}).get("prc_program"))
    if program is not None and targets:
        cps = sorted(targets)
        reference = (np.asarray(cps), np.asarray([program(c) for c in cps]))
    return controls, targets, reference


def cmd_prc(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    params = settings.anf_params()
    window = settings.window()
    eval_day = int(settings.get("eval_day", DEFAULT_EVAL_DAY))
    threshold = float(settings.get("threshold", RATIO_THRESHOLD))
    methods = ["anf", "acrophase"] if args.method == "both" else [args.method]
    workers = int(settings.get("workers", 1))

    controls: list[TraceGroup] = []
    targets: dict[float, list[TraceGroup]] = {}
    reference = None
    if args.manifest:
        controls, targets, reference = _groups_from_manifest(Path(args.manifest))
    for path in args.control or []:
        controls.append(_load_inputs([path], args)[0][0])
    for spec in args.target or []:
        cp_s, _, path = spec.partition("=")
        if not path:
            raise UsageError(f"--target wants CP=FILE, got {spec!r}")
        targets.setdefault(float(cp_s), []).append(_load_inputs([path], args)[0][0])
    if not controls:
        raise DataError("no control group given (need --manifest or --control)")

    control = _merge_groups(controls, "control")
    scenarios = {cp: _merge_groups(gs, f"cp={cp:g}") for cp, gs in targets.items()}

    do_screen = not bool(settings.get("no_screen", False))

    def one_method(method: str):
        return build_prc(scenarios, control, method=method, eval_day=eval_day,
                         params=params, analysis_window=window,
                         screen=do_screen, ratio_threshold=threshold)

    if workers > 1 and len(methods) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curves = list(pool.map(one_method, methods))
    else:
        curves = [one_method(m) for m in methods]

    extra = settings.meta("prc")
    extra["methods"] = methods
    for curve in curves:
        write_series(out / f"prc_{curve.method}.csv", curve, extra_meta=extra)
        print(f"{curve.method} PRC ({len(curve.points)} point(s), eval day {curve.eval_day}):")
        for p in curve.points:
            print(f"  CP {p.cp_h:5.1f} h: shift {p.shift_h:+6.2f} h (sd {p.sd_h:.2f})")
        for w in curve.warnings:
            print(f"  warning: {w}", file=sys.stderr)

    if reference is not None:
        ref_cp, ref_shift = reference
        write_table(out / "prc_programmed.csv", ["cp_h", "shift_h", "sd_h", "method"],
                    [(c, s, 0.0, "programmed") for c, s in zip(ref_cp, ref_shift)],
                    {"kind": "prc", "method": "programmed", "eval_day": eval_day,
                     "warnings": []}, extra_meta=extra)
        for curve in curves:
            if not curve.points:
                continue
            prog = np.asarray([
                ref_shift[list(ref_cp).index(p.cp_h)] if p.cp_h in list(ref_cp) else np.nan
                for p in curve.points
            ])
            err = curve.shifts() - prog
            err = err[np.isfinite(err)]
            if len(err):
                print(f"{curve.method} vs programmed: RMS {float(np.sqrt(np.mean(err ** 2))):.3f} h")

    if len(curves) == 2 and curves[0].points and curves[1].points:
        a, b = curves
        common = sorted(set(p.cp_h for p in a.points) & set(p.cp_h for p in b.points))
        if common:
            da = {p.cp_h: p.shift_h for p in a.points}
            db = {p.cp_h: p.shift_h for p in b.points}
            gaps = np.asarray([wrap12(da[c] - db[c]) for c in common])
            print(f"anf vs acrophase: RMS gap {float(np.sqrt(np.mean(gaps ** 2))):.3f} h "
                  f"over {len(common)} point(s)")

    if settings.get("figures", False) and curves:
        from .plots import render_prc

        render_prc(curves, out / "prc.png", title="phase response curve",
                   reference=reference)
    return 0


# ---------------------------------------------------------------------------
# corrupt


def cmd_corrupt(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    variance = float(settings.get("variance", 10.0))
    seed = int(settings.get("seed", 0) or 0)
    loaded = _load_inputs(args.inputs, args)
    extra = settings.meta("corrupt")
    for path_s, (group, _) in zip(args.inputs, loaded):
        stem = Path(path_s).stem
        traces = tuple(
            corrupt(trace, variance,
                    int(np.random.SeedSequence((seed, i)).generate_state(1, np.uint64)[0]))
            for i, trace in enumerate(group.traces)
        )
        noisy = TraceGroup(traces=traces, label=group.label)
        dest = out / f"{stem}.corrupt.csv"
        write_traces_csv(dest, noisy, extra_meta={**extra, "source": Path(path_s).name,
                                                  "variance": variance, "seed": seed})
        print(f"wrote {dest} (variance {variance:g}, seed {seed})")
    return 0


# ---------------------------------------------------------------------------
# compare


def _paired(curve_a, curve_b, what: str):
    cps_a = [p.cp_h for p in curve_a.points]
    cps_b = [p.cp_h for p in curve_b.points]
    if cps_a != cps_b:
        raise DataError(f"mismatched cp grids between {what}: {cps_a} vs {cps_b}")
    return np.asarray(cps_a), curve_a.shifts(), curve_b.shifts()


def cmd_compare(args) -> int:
    config = _load_config(args.config)
    settings = Settings(args, config)
    out = settings.out_dir()
    curve_a = read_prc_csv(args.prc_a)
    curve_b = read_prc_csv(args.prc_b)
    cps, sa, sb = _paired(curve_a, curve_b, "the two curves")
    diff = np.asarray([wrap12(x) for x in sa - sb])

    rows = []
    header = ["cp_h", "shift_a_h", "shift_b_h", "a_minus_b_h"]
    refs = {}
    if args.reference:
        ref = read_prc_csv(args.reference)
        _, _, sr = _paired(curve_a, ref, "curve A and the reference")
        refs["a"] = np.asarray([wrap12(x) for x in sa - sr])
        refs["b"] = np.asarray([wrap12(x) for x in sb - sr])
        header += ["a_minus_ref_h", "b_minus_ref_h"]
    for i, cp in enumerate(cps):
        row = [cp, sa[i], sb[i], diff[i]]
        if refs:
            row += [refs["a"][i], refs["b"][i]]
        rows.append(row)

    stats = {
        "mean_abs_a_minus_b_h": float(np.mean(np.abs(diff))),
        "rms_a_minus_b_h": float(np.sqrt(np.mean(diff ** 2))),
        "max_abs_a_minus_b_h": float(np.max(np.abs(diff))) if len(diff) else 0.0,
    }
    print(f"mean |A-B| = {stats['mean_abs_a_minus_b_h']:.3f} h, "
          f"RMS = {stats['rms_a_minus_b_h']:.3f} h over {len(cps)} point(s)")
    for key in ("a", "b"):
        if key in refs:
            stats[f"mean_abs_{key}_minus_ref_h"] = float(np.mean(np.abs(refs[key])))
            print(f"mean |{key.upper()}-ref| = {stats[f'mean_abs_{key}_minus_ref_h']:.3f} h")
    extra = settings.meta("compare")
    extra.update(stats)
    write_table(out / "prc_compare.csv", header, rows, {"kind": "prc_compare"},
                extra_meta=extra)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub: argparse.ArgumentParser, inputs: bool = True) -> None:
    sub.add_argument("--config", help="JSON config file (flag defaults)")
    sub.add_argument("--out", help="output directory (or $CIRCATRACK_OUT; default .)")
    sub.add_argument("--figures", action="store_true", default=None,
                     help="also render PNG figures next to the CSV output")
    if inputs:
        sub.add_argument("inputs", nargs="+", metavar="FILE",
                         help="monitor TSV or trace CSV input file(s)")
        sub.add_argument("--bin-minutes", type=int, dest="bin_minutes",
                         help="bin width for bare CSV inputs (default 1)")
        sub.add_argument("--t0", help="ISO start timestamp for bare CSV inputs")


def _add_window(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--window-start", type=float, dest="window_start",
                     help=f"analysis window start, hours (default {DEFAULT_ANALYSIS_WINDOW_H[0]:g})")
    sub.add_argument("--window-end", type=float, dest="window_end",
                     help=f"analysis window end, hours (default {DEFAULT_ANALYSIS_WINDOW_H[1]:g})")


def _add_anf(sub: argparse.ArgumentParser) -> None:
    d = AnfParams()
    sub.add_argument("--zeta", type=float, help=f"notch damping ratio (default {d.zeta})")
    sub.add_argument("--gamma-omega", type=float, dest="gamma_omega",
                     help=f"frequency adaptation gain (default {d.gamma_omega})")
    sub.add_argument("--period-init", type=float, dest="period_init",
                     help="initial period guess in hours (default 24)")
    sub.add_argument("--substeps", type=int,
                     help=f"integrator substeps per bin (default {d.substeps_per_bin})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circatrack",
        description="Online circadian phase estimation pipeline for "
                    "locomotor activity data.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {package_version()}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate monitor files from a scenario")
    _add_common(p, inputs=False)
    p.add_argument("--scenario", help="scenario JSON (omit for the built-in "
                                      "nine-incubator protocol)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("screen", help="rhythmicity screening")
    _add_common(p)
    _add_window(p)
    p.add_argument("--threshold", type=float,
                   help=f"band power ratio threshold (default {RATIO_THRESHOLD})")
    p.add_argument("--activity-floor", type=float, dest="activity_floor",
                   help=f"minimum mean counts/bin (default {ACTIVITY_FLOOR})")
    p.add_argument("--labels", action="append",
                   help="truth JSON from synth; prints accuracy/precision/recall")
    p.add_argument("--sweep", help="LO:HI:STEP threshold sweep -> inclusion table")
    p.set_defaults(func=cmd_screen)

    p = subs.add_parser("estimate", help="online phase/period estimation")
    _add_common(p)
    _add_window(p)
    _add_anf(p)
    p.add_argument("--group-mean", action="store_true", default=None, dest="group_mean",
                   help="also estimate on each file's group-mean trace")
    p.add_argument("--workers", type=int, help="parallel workers across files (default 1)")
    p.set_defaults(func=cmd_estimate)

    p = subs.add_parser("cosinor", help="daily-acrophase baseline analysis")
    _add_common(p)
    _add_window(p)
    p.add_argument("--fold-period", type=float, dest="fold_period",
                   help="actogram fold period in hours (default 24)")
    p.add_argument("--actograms", action="store_true", default=None,
                   help="also write per-channel actogram matrices (CSV)")
    p.set_defaults(func=cmd_cosinor)

    p = subs.add_parser("prc", help="build phase-response curves")
    _add_common(p, inputs=False)
    _add_window(p)
    _add_anf(p)
    p.add_argument("--manifest", help="manifest.json from `circatrack synth`")
    p.add_argument("--control", action="append", metavar="FILE",
                   help="control group file (repeatable)")
    p.add_argument("--target", action="append", metavar="CP=FILE",
                   help="stimulated group file at circadian phase CP (repeatable)")
    p.add_argument("--method", choices=["anf", "acrophase", "both"], default="both")
    p.add_argument("--eval-day", type=int, dest="eval_day",
                   help=f"evaluation day (default {DEFAULT_EVAL_DAY})")
    p.add_argument("--threshold", type=float,
                   help=f"screening power-ratio threshold (default {RATIO_THRESHOLD})")
    p.add_argument("--no-screen", action="store_true", default=None, dest="no_screen",
                   help="skip screening (pre-curated or corrupted inputs)")
    p.add_argument("--workers", type=int, help="parallel workers (default 1)")
    p.add_argument("--bin-minutes", type=int, dest="bin_minutes", help=argparse.SUPPRESS)
    p.add_argument("--t0", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_prc)

    p = subs.add_parser("corrupt", help="add Gaussian noise to traces")
    _add_common(p)
    p.add_argument("--variance", type=float, help="noise variance (default 10)")
    p.add_argument("--seed", type=int, help="noise seed (default 0)")
    p.set_defaults(func=cmd_corrupt)

    p = subs.add_parser("compare", help="difference table between two PRC files")
    _add_common(p, inputs=False)
    p.add_argument("prc_a", help="first PRC CSV")
    p.add_argument("prc_b", help="second PRC CSV")
    p.add_argument("--reference", help="reference PRC CSV (e.g. the programmed curve)")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
