"""Behavioral Vernier delay-line TDC simulator.

Exact femtosecond timing, arbiter/thermometer/priority-encoder back end,
Vernier and flash converters with a scikit-learn style API, DNL/INL and
precision characterization, and one-dimensional TOF-PET localization.
"""
from .characterization import (
    NonlinearityReport,
    PrecisionReport,
    TransferCurve,
    characterize,
    dnl_inl,
    find_transitions,
    measure_transitions,
    single_shot,
    sweep_transfer,
)
from .core import (
    ConfigurationError,
    DelayLineInstance,
    DelayLineSpec,
    TimeOverflowError,
    format_ps,
    realize_delay_line,
    sub_seed,
    tap_times,
    time_from_ps,
)
from .encoder import (
    BinaryCode,
    ThermometerCode,
    arbiter_sample,
    leading_ones,
    priority_encode,
    sample_bank,
)
from .tdc import (
    ConversionResult,
    FlashTDC,
    TdcMetrics,
    VernierTDC,
    flash_convert,
    ideal_code,
    vernier_convert,
)
from .tofpet import (
    AnnihilationEvent,
    CoincidenceRecord,
    DetectorGeometry,
    LocalizationResult,
    OverrangeError,
    TofLocalizer,
    arrival_times,
    delta_t,
    displacement,
    localize,
    run_experiment,
)

__version__ = "0.1.0"
