"""Simulation and analysis of a hybrid NV-center / GMI-wire magnetometer."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CalibrationFailure,
    ConfigError,
    FitFailure,
    InsufficientData,
    InvalidArgument,
    NvGmiError,
    OutOfRegime,
    ProtocolError,
    SingularityError,
    UndefinedContrast,
    UnderdeterminedCell,
)
from .gmi import DomainChain, GmiWire, NoiseParams  # noqa: E402
from .spin import FieldAtNv, NvParams, SpinState  # noqa: E402
from .sequences import PulseSequence, SweepPlan  # noqa: E402
from .engine import Models, Trace, run  # noqa: E402
