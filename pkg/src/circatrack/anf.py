"""Adaptive notch tracking of a biased, multi-harmonic activity rhythm.

The estimator follows the fundamental component of

    y(t) = sum_k a_k sin(k*w*t + phi_k) + d + noise

with one second-order damped notch section driven by the residual left
after a feedforward baseline estimate, integrated per input bin with
classical fixed-step RK4 (zero-order-hold input):

    d_hat  = trailing mean of y over one tracked cycle
    e      = y - d_hat - x2
    x1'    = x2
    x2'    = -omega^2 * x1 + 2*zeta*omega * e

``d_hat`` is deliberately not an adapted loop state.  A bias
integrator ``d_hat' = gamma_d * e`` - and likewise a slaved
second-harmonic section sharing the error - couples through ``e`` into
lightly damped closed-loop modes: across the 18-30 h tuning range the
slowest pair decays over 20-40 h, so the capture transient is still
ringing when the five-day settling deadline arrives, and every
frequency retune re-excites it.  The trailing one-cycle mean instead
sits at the boxcar's first zero: it nulls the fundamental exactly,
passes the baseline, follows baseline drift within a cycle, and leaves
the feedback loop a single damped section whose transients die in
``1/(zeta*omega)``, about 4-7 h.

At lock the pair (x2, -omega*x1) rotates on a near-circle at the
input's fundamental frequency, so the wrapped readout

    theta = atan2(x2, -omega * x1)

advances by exactly one turn per cycle regardless of harmonic content.
The notch is deliberately wide, so waveform harmonics leak into the
readout - but only as a strictly cycle-periodic wobble, which every
consumer below removes by construction.  ``psi_unwrapped`` accumulates
the principal-value increments of ``theta`` (each |increment| < pi per
substep, so it is continuous) and is anchored to ``theta`` itself when
the oscillator first starts rotating, so ``psi_unwrapped == theta
(mod 2*pi)`` at all times.  The anchoring matters: an arbitrary origin
would differ from trace to trace with the capture transient, and
phases of separate traces could then not be differenced.

The frequency estimate is servoed once per completed readout turn.
Whenever ``psi_unwrapped`` has advanced 2*pi past the most recent
anchor, the per-turn winding rates between consecutive retained
anchors (up to ``TURN_MEMORY`` of them, newest being the
just-completed turn),

    rate_i = (psi_i+1 - psi_i) / (t_i+1 - t_i),

each measure the input's fundamental frequency between two passes
through the same orbit point - so the cycle-periodic wobble cancels
exactly and only decaying transients or noise survive.  The servo
applies their middle-trimmed mean (largest and smallest dropped once
three turns are retained): a single corrupted turn is discarded
outright instead of biasing the average until it ages out of memory.
The update

    omega <- clamp(omega + gamma_omega * (rate - omega))

then retunes the section, with the clamp projecting onto
``[omega_min, omega_max]``; the retune also rescales ``x1`` by
``(omega_old / omega_new)**2`` so the stiffness term ``-omega^2 x1``
is continuous across it and the section is not kicked.  The whole
spin-up - the stretch to the first crossing plus the first completed
turn, wound while the section amplitude is still building - is
discarded outright; anchors begin at the second crossing.  The default
``gamma_omega = 1`` applies each measurement outright: one clean turn
already snaps the estimate onto the true frequency (the forced
response winds at the input's rate no matter how the section is
tuned), and the growing anchor span then averages measurement noise
over up to ``TURN_MEMORY`` cycles.  Because omega is piecewise
constant (one value per turn), the section integrates as a
time-invariant filter within each cycle; a per-substep frequency law
was evaluated and rejected because its response to the readout's
intra-cycle wobble parametrically pumps the section it tunes (period
bias of order 0.1 h and, at strong second-harmonic content, a spurious
antiphase lock).  A gradient-type law ``omega' = -gamma*omega*x1*e``
fails sooner: its equilibrium is displaced by the rectified
second-harmonic content of ``x1*e`` (about 0.9 h of period error at a
half-amplitude second harmonic) and its pull-in dynamics ring through
the settling deadline.

Raw per-bin recordings of ``psi`` carry the cycle-periodic wobble and
the raw ``omega`` record is a staircase of per-turn measurements.
``anf_run`` therefore reports a trailing one-cycle mean of the
argument, which nulls every harmonic of the tracked period exactly,
plus the half-window lag compensation ``+ omega * window/2`` so it
stays an unbiased estimate of the instantaneous fundamental argument;
the reported frequency is the slope of that cycle-averaged argument
across one further cycle, which pools every sample of two cycles into
each estimate.

For recorded traces, ``anf_run`` and ``run_group`` integrate twice: a
pioneer pass discovers each trace's period from a cold start, and the
reported pass starts already tuned to it, so the reported record never
contains the one large capture-era retune (and the response-phase step
it writes into the argument).  ``anf_step`` remains a strictly online
single-pass primitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import ActivityTrace, DataError, NumericalError

__all__ = [
    "AnfParams",
    "AnfState",
    "PhaseSeries",
    "anf_step",
    "anf_run",
    "run_group",
    "extract_phase",
]

TWO_PI = 2.0 * math.pi

#: Largest angle (rad) the tracked rotation may advance per integration
#: substep, with a factor-two margin on ``omega_max`` folded into the
#: validity checks below.
MAX_STEP_RAD = 0.5

#: Completed readout turns the frequency servo averages over (at most).
TURN_MEMORY = 4


@dataclass(frozen=True)
class AnfParams:
    """Tracker gains and integration settings.

    Defaults satisfy the convergence contract (period error < 0.1 h and
    wrapped phase error < 0.1 rad after five simulated days across
    amplitudes 0.5-50, biases 0-20, and periods 20-28 h).  ``zeta``
    sets both the notch width and the capture rate: section transients
    decay at ``zeta * omega``.
    """

    zeta: float = 0.7                       # notch damping
    gamma_omega: float = 1.0                # frequency correction per turn
    omega_init: float = TWO_PI / 24.0       # rad/h
    omega_min: float = TWO_PI / 30.0        # rad/h
    omega_max: float = TWO_PI / 18.0        # rad/h
    substeps_per_bin: int = 1

    def __post_init__(self) -> None:
        if self.zeta <= 0:
            raise DataError(f"zeta must be > 0, got {self.zeta}")
        if not (0 < self.gamma_omega <= 1):
            raise DataError(
                f"gamma_omega must be in (0, 1], got {self.gamma_omega}"
            )
        if not (0 < self.omega_min <= self.omega_init <= self.omega_max):
            raise DataError(
                "omega bounds must satisfy 0 < omega_min <= omega_init <= omega_max, "
                f"got min={self.omega_min}, init={self.omega_init}, max={self.omega_max}"
            )
        if self.substeps_per_bin < 1:
            raise DataError(f"substeps_per_bin must be >= 1, got {self.substeps_per_bin}")

    def required_substeps(self, dt_h: float) -> int:
        """Minimum substeps keeping 2 * omega_max * h below MAX_STEP_RAD."""
        return int(2.0 * self.omega_max * dt_h / MAX_STEP_RAD) + 1

    def baseline_bins(self, omega: float, dt_h: float) -> int:
        """Bins in one tracked cycle at ``omega`` (the d_hat window)."""
        return max(1, int(round(TWO_PI / (omega * dt_h))))


@dataclass(frozen=True)
class AnfState:
    """Instantaneous tracker state (a pure value; steps return new ones).

    ``y_ring`` holds the most recent input samples (one cycle at
    ``omega_min``, the longest baseline window ever needed), so the
    stepper assumes a fixed ``dt_h`` across a run.
    """

    x1: float = 0.0              # integral filter state, signal units * h
    x2: float = 0.0              # bandpassed signal estimate, signal units
    d_hat: float = 0.0           # baseline estimate, signal units
    omega: float = TWO_PI / 24.0  # rad/h, always in [omega_min, omega_max]
    psi_unwrapped: float = 0.0   # rad, continuous argument estimate
    t_h: float = 0.0             # hours processed
    started: bool = False        # True once the oscillator has left the origin
    #: psi at the last completed turn (or at tracking start); the next
    #: turn completes when psi has advanced 2*pi past this.
    ref_psi_rad: float = 0.0
    #: True once the first completed turn is behind us.  That turn is
    #: wound while the section amplitude is still building, so it is
    #: discarded as spin-up; anchors begin at the second crossing.
    spin_up_done: bool = False
    #: Recent (psi, t_h) turn-completion anchors, oldest first, at most
    #: TURN_MEMORY of them.
    anchors: tuple[tuple[float, float], ...] = ()
    #: Recent input samples for the trailing-mean baseline.
    y_ring: tuple[float, ...] = field(default=(), repr=False)

    @classmethod
    def initial(cls, params: AnfParams) -> "AnfState":
        """Start state: oscillator at rest at ``omega_init``."""
        return cls(omega=params.omega_init)


def anf_step(state: AnfState, y: float, params: AnfParams, dt_h: float) -> AnfState:
    """Advance the tracker by one input bin of width ``dt_h`` hours.

    The bin is integrated in ``params.substeps_per_bin`` RK4 substeps
    with the input and the baseline estimate held constant over the bin
    (zero-order hold).  Raises ``DataError`` for a non-finite sample
    (the caller decides whether to skip-and-hold or abort; ``run_group``
    implements skip-and-hold) and for a step too coarse for the
    oscillator.

    This scalar stepper is the reference implementation; ``run_group``
    performs the same arithmetic vectorized across traces.
    """
    if not math.isfinite(y):
        raise DataError(f"rejected non-finite sample at t={state.t_h} h")
    if dt_h <= 0:
        raise DataError(f"dt_h must be > 0, got {dt_h}")
    h = dt_h / params.substeps_per_bin
    if 2.0 * params.omega_max * h >= MAX_STEP_RAD:
        raise DataError(
            f"dt_h={dt_h} h is too coarse at substeps_per_bin="
            f"{params.substeps_per_bin}; need at least "
            f"{params.required_substeps(dt_h)} substeps per bin"
        )

    zeta = params.zeta
    g_om = params.gamma_omega
    om_min, om_max = params.omega_min, params.omega_max

    x1, x2 = state.x1, state.x2
    om = state.omega
    psi = state.psi_unwrapped
    started = state.started
    ref_psi = state.ref_psi_rad
    spun = state.spin_up_done
    anchors = state.anchors

    ring = (state.y_ring + (y,))[-params.baseline_bins(om_min, dt_h):]
    w_bias = min(len(ring), params.baseline_bins(om, dt_h))
    dh = sum(ring[-w_bias:]) / w_bias

    for j in range(params.substeps_per_bin):
        at_rest = x1 == 0.0 and x2 == 0.0
        theta_prev = math.atan2(x2, -om * x1)
        if not at_rest and not started:
            # First rotation: pin the accumulator to the readout angle so
            # psi is capture-invariant, and start counting turns.
            psi = theta_prev
            ref_psi = psi
            started = True

        # RK4 on (x1, x2) with omega, y, and d_hat held over the substep.
        def deriv(x1_, x2_):
            e = y - dh - x2_
            return x2_, -om * om * x1_ + 2.0 * zeta * om * e

        a1, b1 = deriv(x1, x2)
        a2, b2 = deriv(x1 + 0.5 * h * a1, x2 + 0.5 * h * b1)
        a3, b3 = deriv(x1 + 0.5 * h * a2, x2 + 0.5 * h * b2)
        a4, b4 = deriv(x1 + h * a3, x2 + h * b3)
        x1 += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        x2 += (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)

        if at_rest:
            # No phasor to read while the oscillator sits at the origin:
            # hold frequency and argument (zero-input fixed point).
            continue
        theta = math.atan2(x2, -om * x1)
        psi += (theta - theta_prev + math.pi) % TWO_PI - math.pi
        if psi - ref_psi >= TWO_PI:
            t_now = state.t_h + (j + 1) * h
            if not spun:
                # The first completed turn is spin-up (section amplitude
                # still building); discard it rather than measure it.
                spun = True
            else:
                if anchors:
                    pts = anchors + ((psi, t_now),)
                    rates = [
                        (pts[i + 1][0] - pts[i][0]) / (pts[i + 1][1] - pts[i][1])
                        for i in range(len(pts) - 1)
                    ]
                    if len(rates) >= 3:
                        rate = (sum(rates) - min(rates) - max(rates)) / (len(rates) - 2)
                    else:
                        rate = sum(rates) / len(rates)
                    om_new = min(max(om + g_om * (rate - om), om_min), om_max)
                    if om_new != om:
                        # Keep -om^2*x1 continuous across the retune so
                        # the section is not kicked.
                        x1 *= (om / om_new) ** 2
                        om = om_new
                anchors = (anchors + ((psi, t_now),))[-TURN_MEMORY:]
            ref_psi = psi

    return AnfState(x1=x1, x2=x2, d_hat=dh, omega=om,
                    psi_unwrapped=psi, t_h=state.t_h + dt_h,
                    started=started, ref_psi_rad=ref_psi, spin_up_done=spun,
                    anchors=anchors, y_ring=ring)


def _integrate_group(values: np.ndarray, valid: np.ndarray, dt_h: float,
                     params: AnfParams,
                     om0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized tracker over ``values`` of shape (n_traces, n_bins).

    Performs the same arithmetic as ``anf_step`` on all rows at once,
    optionally starting each row at its own initial frequency ``om0``.
    Invalid samples (per ``valid`` mask) are skipped-and-held: the
    oscillator rotates freely at the current frequency with no
    correction, and the baseline window sees the last valid sample
    held.  Returns per-bin raw ``psi`` and ``omega`` arrays.
    """
    n, nb = values.shape
    h = dt_h / params.substeps_per_bin
    zeta, g_om = params.zeta, params.gamma_omega
    om_min, om_max = params.omega_min, params.omega_max

    x1 = np.zeros(n)
    x2 = np.zeros(n)
    om = np.full(n, params.omega_init) if om0 is None else om0.astype(float).copy()
    psi = np.zeros(n)
    started = np.zeros(n, dtype=bool)
    spun = np.zeros(n, dtype=bool)
    ref_psi = np.zeros(n)
    # Ring buffers of the last TURN_MEMORY (psi, t) turn anchors per row.
    ring_psi = np.zeros((TURN_MEMORY, n))
    ring_t = np.zeros((TURN_MEMORY, n))
    ring_cnt = np.zeros(n, dtype=np.intp)
    ring_pos = np.zeros(n, dtype=np.intp)

    # Baseline windows read from a cumulative sum of the hold-filled
    # input (invalid bins replaced by the last valid sample; zeros
    # before the first valid one, where the loop coasts anyway).
    last_valid = np.maximum.accumulate(
        np.where(valid, np.arange(nb), -1), axis=1)
    filled = np.where(
        last_valid >= 0,
        np.take_along_axis(values, np.maximum(last_valid, 0), axis=1),
        0.0,
    )
    csum = np.concatenate([np.zeros((n, 1)), np.cumsum(filled, axis=1)], axis=1)
    rows = np.arange(n)

    psi_out = np.empty((n, nb))
    om_out = np.empty((n, nb))

    sub = params.substeps_per_bin
    for i in range(nb):
        y = values[:, i]
        ok = valid[:, i]
        w_bias = np.minimum(
            np.maximum(np.round(TWO_PI / (om * dt_h)).astype(np.intp), 1),
            i + 1,
        )
        dh = (csum[rows, i + 1] - csum[rows, i + 1 - w_bias]) / w_bias
        for j in range(sub):
            at_rest = (x1 == 0.0) & (x2 == 0.0)
            theta_prev = np.arctan2(x2, -om * x1)
            newly = ~at_rest & ~started
            if newly.any():
                psi = np.where(newly, theta_prev, psi)
                ref_psi = np.where(newly, theta_prev, ref_psi)
                started |= newly

            def deriv(x1_, x2_):
                e = np.where(ok, y - dh - x2_, 0.0)
                return x2_, -om * om * x1_ + 2.0 * zeta * om * e

            a1, b1 = deriv(x1, x2)
            a2, b2 = deriv(x1 + 0.5 * h * a1, x2 + 0.5 * h * b1)
            a3, b3 = deriv(x1 + 0.5 * h * a2, x2 + 0.5 * h * b2)
            a4, b4 = deriv(x1 + h * a3, x2 + h * b3)
            x1 = x1 + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            x2 = x2 + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)

            theta = np.arctan2(x2, -om * x1)
            dpsi = np.where(at_rest, 0.0,
                            np.remainder(theta - theta_prev + math.pi, TWO_PI) - math.pi)
            psi = psi + dpsi
            crossed = started & ~at_rest & (psi - ref_psi >= TWO_PI)
            if crossed.any():
                idx_all = np.nonzero(crossed)[0]
                t_now = (i * sub + j + 1) * h
                ref_psi[idx_all] = psi[idx_all]
                # Rows still in their first (spin-up) turn: mark it done,
                # record nothing.
                idx = idx_all[spun[idx_all]]
                spun[idx_all] = True
                meas = idx[ring_cnt[idx] > 0]
                if meas.size:
                    m = meas.size
                    cm = ring_cnt[meas]
                    # Anchor sequence oldest..newest plus the current
                    # point; consecutive differences give the per-turn
                    # winding rates (cm of them per row).
                    seq_psi = np.full((TURN_MEMORY + 1, m), np.nan)
                    seq_t = np.full((TURN_MEMORY + 1, m), np.nan)
                    for kk in range(TURN_MEMORY):
                        has = cm > kk
                        pos_k = (ring_pos[meas[has]] - cm[has] + kk) % TURN_MEMORY
                        seq_psi[kk, has] = ring_psi[pos_k, meas[has]]
                        seq_t[kk, has] = ring_t[pos_k, meas[has]]
                    cols = np.arange(m)
                    seq_psi[cm, cols] = psi[meas]
                    seq_t[cm, cols] = t_now
                    r = np.diff(seq_psi, axis=0) / np.diff(seq_t, axis=0)
                    tot_r = np.nansum(r, axis=0)
                    rate = np.where(
                        cm >= 3,
                        (tot_r - np.nanmin(r, axis=0) - np.nanmax(r, axis=0))
                        / np.maximum(cm - 2, 1),
                        tot_r / cm,
                    )
                    om_new = np.clip(om[meas] + g_om * (rate - om[meas]), om_min, om_max)
                    x1[meas] *= (om[meas] / om_new) ** 2
                    om[meas] = om_new
                p = ring_pos[idx]
                ring_psi[p, idx] = psi[idx]
                ring_t[p, idx] = t_now
                ring_pos[idx] = (p + 1) % TURN_MEMORY
                ring_cnt[idx] = np.minimum(ring_cnt[idx] + 1, TURN_MEMORY)
        psi_out[:, i] = psi
        om_out[:, i] = om
    return psi_out, om_out


def _trailing_mean(arr: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Trailing mean over up to ``window`` samples along the last axis.

    Returns (means, effective window length per bin).  The head uses an
    expanding window so the output is defined everywhere.
    """
    n = arr.shape[-1]
    csum = np.cumsum(arr, axis=-1)
    idx = np.arange(n)
    w_eff = np.minimum(idx + 1, window)
    head = csum[..., :window] / (idx[:window] + 1)
    tail = (csum[..., window:] - csum[..., :-window]) / window
    return np.concatenate([head, tail], axis=-1), w_eff


@dataclass(frozen=True)
class PhaseSeries:
    """Per-bin tracker output on the trace's bin-end time grid.

    ``argument_rad`` is the lag-compensated one-cycle trailing mean of
    the raw argument and ``omega_rad_per_h`` its slope across one
    further cycle (see module docstring); ``period_h`` is
    ``2*pi / omega_rad_per_h``.  ``phase_h`` is filled by
    ``extract_phase`` (zeros, with ``phase_defined`` False, for
    degenerate inputs that never start rotating).  ``trend_alpha_rad``
    and ``trend_beta_rad_per_h`` record the detrend line used for
    ``phase_h``; comparisons between series require equal ``beta``.
    """

    times_h: np.ndarray
    argument_rad: np.ndarray
    omega_rad_per_h: np.ndarray
    phase_h: np.ndarray
    period_h: np.ndarray
    channel_id: str = ""
    phase_defined: bool = True
    trend_alpha_rad: float = math.nan
    trend_beta_rad_per_h: float = math.nan
    params: AnfParams | None = None

    def __post_init__(self) -> None:
        n = len(self.times_h)
        for name in ("argument_rad", "omega_rad_per_h", "phase_h", "period_h"):
            if len(getattr(self, name)) != n:
                raise DataError(f"{name} length does not match times_h")

    def window_mask(self, t_start_h: float, t_end_h: float) -> np.ndarray:
        return (self.times_h >= t_start_h) & (self.times_h <= t_end_h)


def run_group(traces: Sequence[ActivityTrace], params: AnfParams | None = None,
              detrend_window: tuple[float, float] | None = None) -> list[PhaseSeries]:
    """Run the tracker over several same-grid traces, vectorized.

    Each pass is equivalent to stepping the traces through ``anf_step``
    but batched; use this for cohorts (hundreds of channels integrate
    in roughly the time of one).  Two passes are made: the second is
    re-tuned from the first (see the comment inline), so the reported
    series never contain capture-era tuning steps.  ``anf_step`` users
    consuming a truly live stream get the single cold-started pass.
    """
    if params is None:
        params = AnfParams()
    if not traces:
        return []
    ref = traces[0]
    for t in traces:
        if t.bin_minutes != ref.bin_minutes or t.n_bins != ref.n_bins:
            raise DataError("run_group requires traces on one shared grid")
    if ref.duration_hours < 48.0:
        raise DataError(
            f"trace too short to settle: {ref.duration_hours} h < 48 h"
        )
    dt = ref.dt_h
    h = dt / params.substeps_per_bin
    if 2.0 * params.omega_max * h >= MAX_STEP_RAD:
        raise DataError(
            f"bin width {dt} h too coarse at substeps_per_bin="
            f"{params.substeps_per_bin}; need at least "
            f"{params.required_substeps(dt)} substeps per bin"
        )

    values = np.stack([t.values for t in traces])
    valid = np.isfinite(values)

    # Two passes.  The pioneer pass discovers each trace's period; the
    # reported pass re-integrates with the tracker already tuned to it.
    # A cold start must eventually retune from omega_init onto the true
    # frequency, and that one large retune shifts the section's response
    # phase at the input frequency (arg H changes), writing a permanent
    # step of order gamma_omega * domega/omega radians into the raw
    # argument record around cycle three - which the slope-based
    # frequency report then straddles for two further cycles.  Starting
    # tuned, the record carries no capture-era tuning steps at all.
    psi_raw, om_raw = _integrate_group(values, valid, dt, params)
    om0 = np.empty(len(traces))
    nb = values.shape[1]
    tail = max(1, min(nb, int(round(48.0 / dt))))
    for r in range(len(traces)):
        om0[r] = _settled_omega(psi_raw[r], om_raw[r], dt, tail, params)
    psi_raw, om_raw = _integrate_group(values, valid, dt, params, om0=om0)

    times = ref.times_h()
    out: list[PhaseSeries] = []
    for row, trace in enumerate(traces):
        out.append(_finish_series(times, psi_raw[row], om_raw[row], dt,
                                  trace.channel_id, params, detrend_window))
    return out


def _settled_omega(psi_raw: np.ndarray, om_raw: np.ndarray, dt: float,
                   tail: int, params: AnfParams) -> float:
    """Best end-of-record frequency for bootstrapping the reported pass.

    The winding slope of the raw argument over the last tracked cycle
    (cycle-periodic wobble cancels across one full cycle); falls back
    to the servo's own record, or to ``omega_init`` for traces that
    never rotate.
    """
    n = len(psi_raw)
    if psi_raw[-1] - psi_raw[0] < TWO_PI:
        return params.omega_init
    om_med = float(np.median(om_raw[-tail:]))
    window = int(np.clip(round(TWO_PI / (om_med * dt)), 1, n - 1))
    om_slope = (psi_raw[-1] - psi_raw[-1 - window]) / (window * dt)
    if not np.isfinite(om_slope) or om_slope <= 0:
        om_slope = om_med
    return float(np.clip(om_slope, params.omega_min, params.omega_max))


def anf_run(trace: ActivityTrace, params: AnfParams | None = None,
            detrend_window: tuple[float, float] | None = None) -> PhaseSeries:
    """Track one trace and extract its detrended phase.

    ``detrend_window`` defaults to the second half of the recording
    (settled by construction for inputs within the convergence
    contract).
    """
    return run_group([trace], params, detrend_window)[0]


def _finish_series(times: np.ndarray, psi_raw: np.ndarray, om_raw: np.ndarray,
                   dt: float, channel_id: str, params: AnfParams,
                   detrend_window: tuple[float, float] | None) -> PhaseSeries:
    n = len(times)
    # One tracked cycle, from the settled end of the frequency record.
    tail = om_raw[-max(1, min(n, int(round(48.0 / dt)))):]
    period_est = TWO_PI / float(np.median(tail))
    window = int(np.clip(round(period_est / dt), 1, n))

    rotates = psi_raw[-1] - psi_raw[0] >= TWO_PI
    om_sm, _ = _trailing_mean(om_raw, window)
    core, w_eff = _trailing_mean(psi_raw, window)
    # The reported rate is the slope of the cycle-averaged argument over
    # one further cycle: cycle-averaging nulls the waveform wobble at
    # both endpoints, and the slope pools every sample of two cycles
    # rather than the two instantaneous samples a turn measurement uses.
    # The servo's per-turn record fills the pre-settle head.
    om_rep = om_sm.copy()
    if rotates and n > window:
        om_rep[window:] = (core[window:] - core[:-window]) / (window * dt)
    # A trailing mean lags the center of its window; restore the
    # half-window advance so the argument stays current.
    psi_sm = core + om_rep * (w_eff - 1) * dt / 2.0

    series = PhaseSeries(
        times_h=times,
        argument_rad=psi_sm,
        omega_rad_per_h=om_rep,
        phase_h=np.zeros(n),
        period_h=TWO_PI / om_rep,
        channel_id=channel_id,
        phase_defined=False,
        params=params,
    )
    if not rotates:
        # Never completed a cycle (all-zero or constant input): report
        # the frozen frequency and flag the phase as undefined.
        return series
    if detrend_window is None:
        detrend_window = (times[-1] / 2.0, times[-1])
    return extract_phase(series, detrend_window)


def extract_phase(series: PhaseSeries, detrend_window: tuple[float, float],
                  trend: tuple[float, float] | None = None) -> PhaseSeries:
    """Detrend the argument into a circadian phase in hours.

    A line ``alpha + beta*t`` is least-squares fitted to
    ``argument_rad`` over ``detrend_window`` (or taken from ``trend``,
    e.g. a control's fit, so two series share a time base); then

        phase_h = (argument_rad - alpha - beta*t) / beta.

    One global line serves the whole series, so ``phase_h`` is
    comparable across time: a +pi/2 argument step at beta = 2*pi/24
    (a quarter cycle) appears as a +6 h phase step.
    """
    t0, t1 = detrend_window
    if t1 - t0 < 24.0:
        raise DataError(f"detrend window must span >= 24 h, got {t1 - t0} h")
    if t0 < series.times_h[0] - 1e-9 or t1 > series.times_h[-1] + 1e-9:
        raise DataError(
            f"detrend window [{t0}, {t1}] h outside series "
            f"[{series.times_h[0]}, {series.times_h[-1]}] h"
        )
    if trend is None:
        mask = series.window_mask(t0, t1)
        if mask.sum() < 2:
            raise DataError("detrend window holds fewer than 2 samples")
        beta, alpha = np.polyfit(series.times_h[mask], series.argument_rad[mask], 1)
    else:
        alpha, beta = trend
    if beta <= 0:
        raise NumericalError(
            f"argument does not advance over the detrend window (beta={beta} rad/h)"
        )
    phase = (series.argument_rad - alpha - beta * series.times_h) / beta
    return replace(series, phase_h=phase, phase_defined=True,
                   trend_alpha_rad=float(alpha), trend_beta_rad_per_h=float(beta))
