"""Ground-truth activity generator: rhythms, light resets, masking, counts.

A synthetic fly is a phase oscillator read out through a harmonic rate
model.  Its instantaneous argument ``theta(t)`` (radians; one turn per
subjective day) is pinned to the light schedule while entraining light
is present — lights-off defines circadian phase CP 0 and the argument
advances at one turn per 24 h — and free-runs at one turn per
``period_h`` after the final entraining lights-off.  A short light
pulse delivered in free run steps the argument instantaneously by
``prc_program(cp at onset) * 2*pi / period_h``, i.e. by the programmed
phase shift expressed in hours of free-running time, which is exactly
the step the analysis stage is later asked to recover.

The expected count rate per bin is

    lambda(t) = bias_d + sum_k a_k * sin(k*theta(t) + phi_k)
              + masking_gain * sum_edges exp(-(t - t_edge)/0.25)

clamped at zero, with the masking sum running over light on/off edges
(a 15-minute startle transient, mimicking the direct light response
that rides on top of the clock-driven rhythm).  ``count_model``
"poisson" draws one Poisson variate per bin from that rate;
"none" returns the clamped rate itself (exact deterministic traces for
oracle tests).

Everything is deterministic given the spec: per-fly RNG streams are
derived with ``numpy.random.SeedSequence((master_seed, fly_index))``
so cohort generation is reproducible bin-for-bin and independent of
generation order.

Default waveform constants (harmonics 4.0 and 2.0 on k = 1, 2; bias
5.0 counts/bin) are calibration choices, not measurements: they give a
bimodal (crepuscular) profile whose clean AC RMS is sqrt(10) ~= 3.2
counts/bin, a realistic regime for 1-minute beam-break data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .anf import TWO_PI, PhaseSeries
from .core import ActivityTrace, DataError, LightSchedule, TraceGroup

__all__ = [
    "PrcProgram",
    "SynthSpec",
    "Cohort",
    "CohortResult",
    "generate_activity",
    "generate_cohort",
    "corrupt",
    "ld_dd_schedule",
    "pulse_time_h",
    "DEFAULT_HARMONICS",
    "DEFAULT_BIAS",
    "DEFAULT_MASKING_GAIN",
    "DEFAULT_T0",
    "ENTRAIN_MIN_H",
    "MASKING_TAU_H",
]

# Bimodal default waveform: two peaks per cycle with a dip between,
# AC RMS = sqrt(4^2/2 + 2^2/2) = sqrt(10) counts/bin.
DEFAULT_HARMONICS: tuple[tuple[int, float, float], ...] = (
    (1, 4.0, 0.0),
    (2, 2.0, math.pi / 2.0),
)
DEFAULT_BIAS = 5.0
DEFAULT_MASKING_GAIN = 2.0
DEFAULT_T0 = "2024-01-01T08:00:00"

# Light intervals at least this long entrain (pin) the oscillator;
# shorter ones are resetting pulses.
ENTRAIN_MIN_H = 6.0

# Startle-transient decay constant (15 min).
MASKING_TAU_H = 0.25

_PIN_RATE = TWO_PI / 24.0  # entrained argument rate, rad/h


@dataclass(frozen=True)
class PrcProgram:
    """Tabulated phase-response curve: CP of pulse onset -> shift in hours.

    Piecewise-linear and 24 h periodic (the last knot interpolates back
    to the first).  Positive shifts are advances.
    """

    cp_h: tuple[float, ...]
    shift_h: tuple[float, ...]

    def __post_init__(self) -> None:
        cp = tuple(float(c) for c in self.cp_h)
        sh = tuple(float(s) for s in self.shift_h)
        object.__setattr__(self, "cp_h", cp)
        object.__setattr__(self, "shift_h", sh)
        if len(cp) != len(sh):
            raise DataError("cp_h and shift_h must have equal length")
        if len(cp) < 1:
            raise DataError("PRC program needs at least one knot")
        if any(not 0.0 <= c < 24.0 for c in cp):
            raise DataError("PRC knots must lie in [0, 24)")
        if any(b <= a for a, b in zip(cp, cp[1:])):
            raise DataError("PRC knots must be strictly increasing")
        if not all(map(math.isfinite, cp + sh)):
            raise DataError("PRC knots must be finite")

    def __call__(self, cp_h: float) -> float:
        cp = float(cp_h) % 24.0
        knots = np.asarray(self.cp_h + (self.cp_h[0] + 24.0,))
        vals = np.asarray(self.shift_h + (self.shift_h[0],))
        if cp < knots[0]:
            cp += 24.0
        return float(np.interp(cp, knots, vals))

    @classmethod
    def sinusoid(cls, amplitude_h: float = 2.0, zero_cp_h: float = 0.0,
                 knot_step_h: float = 0.25) -> "PrcProgram":
        """Smooth delay-then-advance curve: -A*sin(2*pi*(cp - zero)/24).

        Defaults delay pulses in the early subjective night (CP ~6) and
        advance them in the late night (CP ~18), the textbook fly shape.
        Tabulated on a fine grid so the piecewise-linear evaluation is a
        faithful stand-in for the analytic curve.
        """
        cp = np.arange(0.0, 24.0, knot_step_h)
        shift = -amplitude_h * np.sin(TWO_PI * (cp - zero_cp_h) / 24.0)
        return cls(cp_h=tuple(cp), shift_h=tuple(shift))

    @classmethod
    def zero(cls) -> "PrcProgram":
        return cls(cp_h=(0.0, 12.0), shift_h=(0.0, 0.0))


@dataclass(frozen=True)
class SynthSpec:
    """Ground-truth parameters for one synthetic fly."""

    period_h: float
    phase0_h: float = 0.0
    harmonics: tuple[tuple[int, float, float], ...] = DEFAULT_HARMONICS
    bias_d: float = DEFAULT_BIAS
    prc_program: PrcProgram | None = None
    masking_gain: float = 0.0
    count_model: str = "poisson"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 18.0 <= self.period_h <= 30.0:
            raise DataError(f"period_h must lie in [18, 30], got {self.period_h}")
        if self.bias_d < 0:
            raise DataError(f"bias_d must be >= 0, got {self.bias_d}")
        if self.masking_gain < 0:
            raise DataError(f"masking_gain must be >= 0, got {self.masking_gain}")
        if self.count_model not in ("poisson", "none"):
            raise DataError(f"count_model must be 'poisson' or 'none', got {self.count_model!r}")
        norm = tuple((int(k), float(a), float(p)) for k, a, p in self.harmonics)
        object.__setattr__(self, "harmonics", norm)
        for k, a, _ in norm:
            if k < 1:
                raise DataError(f"harmonic order must be >= 1, got {k}")
            if a < 0:
                raise DataError(f"harmonic amplitude must be >= 0, got {a}")


@dataclass(frozen=True)
class Cohort:
    """A group of flies with per-fly parameter jitter.

    ``rhythmic_fraction`` of the flies (rounded) carry the jittered
    oscillator; the rest are arrhythmic and emit flat-rate counts at
    the (jittered) bias only.  Jitter draws are Gaussian: ``period_sd_h``
    in hours on the period, ``phase0_sd_h`` in hours on the starting
    phase, and ``amplitude_cv`` / ``bias_cv`` as fractional scale
    factors on the harmonic amplitudes and the bias.
    """

    n_flies: int
    rhythmic_fraction: float
    label: str = "cohort"
    period_sd_h: float = 0.05
    phase0_sd_h: float = 0.0
    amplitude_cv: float = 0.10
    bias_cv: float = 0.10

    def __post_init__(self) -> None:
        if self.n_flies < 1:
            raise DataError(f"n_flies must be >= 1, got {self.n_flies}")
        if not 0.0 <= self.rhythmic_fraction <= 1.0:
            raise DataError(
                f"rhythmic_fraction must lie in [0, 1], got {self.rhythmic_fraction}"
            )
        for name in ("period_sd_h", "phase0_sd_h", "amplitude_cv", "bias_cv"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0")


@dataclass(frozen=True)
class CohortResult:
    """Generated traces plus everything the generator knows about them."""

    group: TraceGroup
    rhythmic: tuple[bool, ...]        # ground-truth label per channel
    truths: tuple[PhaseSeries, ...]   # ground-truth phase per channel
    specs: tuple[SynthSpec, ...]      # realized per-fly parameters


def _entrainment(schedule: LightSchedule) -> tuple[list[tuple[float, float]], list[float]]:
    """Split light intervals into entraining spans and pulse onsets."""
    entraining = [(s, e) for s, e, _, _ in schedule.intervals if e - s >= ENTRAIN_MIN_H]
    release = entraining[-1][1] if entraining else 0.0
    pulses = [
        s for s, e, _, _ in schedule.intervals
        if e - s < ENTRAIN_MIN_H and s >= release
    ]
    return entraining, pulses


def _argument_model(
    spec: SynthSpec, schedule: LightSchedule
) -> tuple[float, float, list[tuple[float, float]]]:
    """Resolve (release_h, theta_at_release, pulse steps) for a spec.

    With entraining light, theta(t) = 2*pi*(t - anchor)/24 up to the
    release (anchor = first lights-off, so CP 0 falls there); afterwards
    it advances at 2*pi/period_h plus the accumulated pulse steps.
    Without entraining light the fly free-runs from t = 0 at phase
    ``phase0_h`` (hours of subjective day).
    """
    entraining, pulse_onsets = _entrainment(schedule)
    if entraining:
        anchor = entraining[0][1]
        release = entraining[-1][1]
        theta_release = _PIN_RATE * (release - anchor)
    else:
        release = 0.0
        theta_release = TWO_PI * spec.phase0_h / 24.0

    rate = TWO_PI / spec.period_h
    steps: list[tuple[float, float]] = []
    acc = 0.0
    for t_p in sorted(pulse_onsets):
        theta_pre = theta_release + rate * (t_p - release) + acc
        cp = (theta_pre * 24.0 / TWO_PI) % 24.0
        shift_h = spec.prc_program(cp) if spec.prc_program is not None else 0.0
        d_theta = shift_h * rate
        if d_theta != 0.0:
            steps.append((t_p, d_theta))
        acc += d_theta
    return release, theta_release, steps


def _theta_at(t: np.ndarray, spec: SynthSpec, schedule: LightSchedule,
              release: float, theta_release: float,
              steps: list[tuple[float, float]]) -> np.ndarray:
    entraining, _ = _entrainment(schedule)
    rate = TWO_PI / spec.period_h
    theta = theta_release + rate * (t - release)
    if entraining:
        anchor = entraining[0][1]
        pinned = t < release
        theta[pinned] = _PIN_RATE * (t[pinned] - anchor)
    for t_p, d_theta in steps:
        theta[t >= t_p] += d_theta
    return theta


def _masking(t: np.ndarray, schedule: LightSchedule, gain: float) -> np.ndarray:
    out = np.zeros_like(t)
    if gain <= 0.0:
        return out
    for edge in schedule.edges():
        tail = t >= edge
        out[tail] += gain * np.exp(-(t[tail] - edge) / MASKING_TAU_H)
    return out


def generate_activity(spec: SynthSpec, schedule: LightSchedule, days: int,
                      bin_minutes: int = 1,
                      channel_id: str = "synth-01") -> tuple[ActivityTrace, PhaseSeries]:
    """Generate one fly's trace and its exact ground-truth phase.

    The returned ``PhaseSeries`` lives on the trace's bin-end grid with
    the true argument, the true instantaneous rate (2*pi/24 while
    pinned, 2*pi/period_h in free run), and ``phase_h`` detrended
    against the free-run line anchored at release — so programmed pulse
    shifts appear in ``phase_h`` as steps of exactly the programmed
    hours, and the series compares directly against estimator output.
    """
    if days < 1:
        raise DataError(f"days must be >= 1, got {days}")
    if bin_minutes < 1:
        raise DataError(f"bin_minutes must be >= 1, got {bin_minutes}")

    dt_h = bin_minutes / 60.0
    n = int(round(days * 24.0 / dt_h))
    centers = (np.arange(n) + 0.5) * dt_h
    ends = (np.arange(n) + 1.0) * dt_h

    release, theta_release, steps = _argument_model(spec, schedule)

    lam = np.full(n, float(spec.bias_d))
    theta_c = _theta_at(centers, spec, schedule, release, theta_release, steps)
    for k, a_k, phi_k in spec.harmonics:
        lam += a_k * np.sin(k * theta_c + phi_k)
    lam += _masking(centers, schedule, spec.masking_gain)
    np.clip(lam, 0.0, None, out=lam)

    if spec.count_model == "poisson":
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        values = rng.poisson(lam).astype(float)
    else:
        values = lam

    trace = ActivityTrace(channel_id=channel_id, t0=DEFAULT_T0,
                          bin_minutes=bin_minutes, values=values)

    theta_e = _theta_at(ends, spec, schedule, release, theta_release, steps)
    rate = TWO_PI / spec.period_h
    entraining, _ = _entrainment(schedule)
    omega = np.full(n, rate)
    if entraining:
        omega[ends < release] = _PIN_RATE
    alpha = theta_release - rate * release
    truth = PhaseSeries(
        times_h=ends,
        argument_rad=theta_e,
        omega_rad_per_h=omega,
        phase_h=(theta_e - alpha - rate * ends) / rate,
        period_h=TWO_PI / omega,
        channel_id=channel_id,
        phase_defined=True,
        trend_alpha_rad=alpha,
        trend_beta_rad_per_h=rate,
    )
    return trace, truth


def generate_cohort(cohort: Cohort, spec: SynthSpec, schedule: LightSchedule,
                    days: int, bin_minutes: int = 1) -> CohortResult:
    """Generate a jittered cohort around ``spec`` with ground-truth labels.

    The first ``round(n_flies * rhythmic_fraction)`` channels are
    rhythmic; the rest emit flat-rate counts at the jittered bias (their
    ground-truth series still reports the nominal free-run line, with
    no rhythm behind it).  ``spec.seed`` is the cohort master seed.
    """
    n_rhythmic = int(round(cohort.n_flies * cohort.rhythmic_fraction))
    traces: list[ActivityTrace] = []
    labels: list[bool] = []
    truths: list[PhaseSeries] = []
    specs: list[SynthSpec] = []
    width = max(2, len(str(cohort.n_flies)))

    for i in range(cohort.n_flies):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, i)))
        fly_seed = int(rng.integers(0, 2**63))
        period = float(np.clip(spec.period_h + cohort.period_sd_h * rng.standard_normal(),
                               18.0, 30.0))
        phase0 = spec.phase0_h + cohort.phase0_sd_h * rng.standard_normal()
        bias = spec.bias_d * max(0.0, 1.0 + cohort.bias_cv * rng.standard_normal())
        rhythmic = i < n_rhythmic
        if rhythmic:
            harmonics = tuple(
                (k, a * max(0.0, 1.0 + cohort.amplitude_cv * rng.standard_normal()), p)
                for k, a, p in spec.harmonics
            )
        else:
            harmonics = ()
        fly_spec = replace(spec, period_h=period, phase0_h=phase0, bias_d=bias,
                           harmonics=harmonics, seed=fly_seed)
        cid = f"{cohort.label}-{i + 1:0{width}d}"
        trace, truth = generate_activity(fly_spec, schedule, days, bin_minutes,
                                         channel_id=cid)
        traces.append(trace)
        labels.append(rhythmic)
        truths.append(truth)
        specs.append(fly_spec)

    return CohortResult(
        group=TraceGroup(traces=tuple(traces), label=cohort.label),
        rhythmic=tuple(labels),
        truths=tuple(truths),
        specs=tuple(specs),
    )


def corrupt(trace: ActivityTrace, variance: float, seed: int) -> ActivityTrace:
    """Add zero-mean Gaussian noise of the given variance to every bin.

    No clipping: corrupted traces may go negative, and the analysis
    stages must take them as-is.
    """
    if variance < 0:
        raise DataError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return trace
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    noise = math.sqrt(variance) * rng.standard_normal(trace.n_bins)
    return trace.with_values(trace.values + noise)


def pulse_time_h(cp_h: float, period_h: float, release_h: float = 60.0) -> float:
    """Onset time of the light pulse that lands on circadian phase ``cp_h``.

    Release from entrainment happens at CP 0; the pulse is placed at the
    first occurrence of ``cp_h`` that is at least one full free-running
    cycle after release, i.e. ``release + (24 + cp) * period / 24`` —
    one undisturbed cycle lets transients from the lights-off edge decay
    before the stimulus.
    """
    if not 0.0 <= cp_h < 24.0:
        raise DataError(f"cp_h must lie in [0, 24), got {cp_h}")
    return release_h + (24.0 + cp_h) * period_h / 24.0


def ld_dd_schedule(ld_days: int = 3, photoperiod_h: float = 12.0,
                   ld_lux: float = 100.0,
                   pulse_cp_h: float | None = None, period_h: float = 24.0,
                   pulse_duration_h: float = 1.0, pulse_lux: float = 4.0,
                   pulse_wavelength: str = "470nm") -> LightSchedule:
    """Standard protocol: LD cycles, release into darkness, optional pulse.

    Day n of entrainment is lit over [24*(n-1), 24*(n-1) + photoperiod);
    the release into free run falls at the last lights-off.  When
    ``pulse_cp_h`` is given, a short monochromatic pulse is appended at
    ``pulse_time_h(pulse_cp_h, period_h, release)``.
    """
    if ld_days < 1:
        raise DataError(f"ld_days must be >= 1, got {ld_days}")
    if not 0.0 < photoperiod_h < 24.0:
        raise DataError(f"photoperiod_h must lie in (0, 24), got {photoperiod_h}")
    intervals = [
        (24.0 * d, 24.0 * d + photoperiod_h, ld_lux, "white")
        for d in range(ld_days)
    ]
    if pulse_cp_h is not None:
        onset = pulse_time_h(pulse_cp_h, period_h,
                             release_h=24.0 * (ld_days - 1) + photoperiod_h)
        intervals.append((onset, onset + pulse_duration_h, pulse_lux, pulse_wavelength))
    return LightSchedule(intervals=tuple(intervals))
