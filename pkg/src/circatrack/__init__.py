"""Online circadian phase estimation for locomotor activity data.

The pipeline: generate or ingest per-minute beam-break traces, screen
out arrhythmic channels with a periodogram power-ratio test, track each
channel's instantaneous circadian period and phase online with an
adaptive notch tracker, fit the classical daily-acrophase baseline, and
assemble phase-response curves from light-pulse experiments — with a
synthetic ground-truth generator to validate every stage.
"""

from .anf import (
    AnfParams,
    AnfState,
    PhaseSeries,
    anf_run,
    anf_step,
    extract_phase,
    run_group,
)
from .core import (
    ActivityTrace,
    DataError,
    LightSchedule,
    NumericalError,
    TraceGroup,
    average_traces,
    light_at,
    light_profile,
)
from .cosinor import (
    AcrophaseTrack,
    CosinorFit,
    actogram_export,
    cosinor_fit,
    daily_acrophases,
)
from .ingest import (
    CsvLayout,
    DamParseResult,
    Gap,
    parse_csv,
    parse_dam,
    read_phase_series,
    read_prc_csv,
    write_dam,
    write_series,
    write_traces_csv,
)
from .periodogram import (
    ACTIVITY_FLOOR,
    CIRCADIAN_BAND_H,
    RATIO_THRESHOLD,
    RATIO_THRESHOLD_STRICT,
    PeriodogramResult,
    ScreeningReport,
    periodogram,
    screen_flies,
)
from .prc import (
    PrcCurve,
    PrcPoint,
    build_prc,
    phase_shift_acrophase,
    phase_shift_anf,
    wrap12,
)
from .synth import (
    Cohort,
    CohortResult,
    PrcProgram,
    SynthSpec,
    corrupt,
    generate_activity,
    generate_cohort,
    ld_dd_schedule,
    pulse_time_h,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityTrace",
    "LightSchedule",
    "TraceGroup",
    "DataError",
    "NumericalError",
    "light_at",
    "light_profile",
    "average_traces",
    "AnfParams",
    "AnfState",
    "PhaseSeries",
    "anf_step",
    "anf_run",
    "run_group",
    "extract_phase",
    "PeriodogramResult",
    "ScreeningReport",
    "periodogram",
    "screen_flies",
    "CIRCADIAN_BAND_H",
    "RATIO_THRESHOLD",
    "RATIO_THRESHOLD_STRICT",
    "ACTIVITY_FLOOR",
    "CosinorFit",
    "AcrophaseTrack",
    "cosinor_fit",
    "daily_acrophases",
    "actogram_export",
    "PrcPoint",
    "PrcCurve",
    "wrap12",
    "phase_shift_anf",
    "phase_shift_acrophase",
    "build_prc",
    "SynthSpec",
    "Cohort",
    "CohortResult",
    "PrcProgram",
    "generate_activity",
    "generate_cohort",
    "corrupt",
    "ld_dd_schedule",
    "pulse_time_h",
    "CsvLayout",
    "Gap",
    "DamParseResult",
    "parse_dam",
    "write_dam",
    "parse_csv",
    "write_traces_csv",
    "write_series",
    "read_phase_series",
    "read_prc_csv",
    "__version__",
]
