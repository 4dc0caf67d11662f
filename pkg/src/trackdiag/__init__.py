"""Track-circuit failure diagnostics: synthetic fault generation, kernel SVM
training by SMO, evaluation and field-log classification."""

from trackdiag.errors import ConvergenceError, InvalidArgumentError, ParseError
from trackdiag.signal import (
    OccupancyEvent,
    TrackCircuitConfig,
    VoltageTrace,
    detect_occupancies,
    gen_nominal_trace,
)
from trackdiag.generator import (
    AnomalyClass,
    BadContactParams,
    ContactInterruptedParams,
    SeverityProfile,
    TractionNoiseParams,
    gen_bad_contact,
    gen_contact_interrupted,
    gen_traction_noise,
    generate_window,
    sample_params,
)

from trackdiag._version import __version__

__all__ = [
    "__version__",
    "AnomalyClass",
    "BadContactParams",
    "ContactInterruptedParams",
    "ConvergenceError",
    "InvalidArgumentError",
    "OccupancyEvent",
    "ParseError",
    "SeverityProfile",
    "TrackCircuitConfig",
    "TractionNoiseParams",
    "VoltageTrace",
    "detect_occupancies",
    "gen_bad_contact",
    "gen_contact_interrupted",
    "gen_nominal_trace",
    "gen_traction_noise",
    "generate_window",
    "sample_params",
]
