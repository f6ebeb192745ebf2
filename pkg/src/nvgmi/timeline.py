"""Timeline segments that make up a pulse sequence.

Times are in seconds, frequencies in Hz, angles and phases in radians.
``MwPulse.duration`` is zero for ideal instantaneous rotations; the finite
pulse mode used by Rabi sweeps sets it to ``angle / (2*pi*rabi_freq)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union


@dataclass(frozen=True)
class LaserInit:
    duration: float = 3e-6
    kind = "laser_init"


@dataclass(frozen=True)
class MwPulse:
    angle: float
    phase: float = 0.0
    # absolute carrier in Hz; None locks to the addressed hyperfine centroid
    carrier: Optional[float] = None
    # offset added to the resolved carrier, Hz
    detuning: float = 0.0
    duration: float = 0.0
    kind = "mw_pulse"


@dataclass(frozen=True)
class FreeEvolve:
    duration: float
    kind = "free_evolve"


@dataclass(frozen=True)
class RfDrive:
    """RF voltage ``v_ac*sin(2*pi*f_ac*(t - t_start) + phase)`` on the wire.

    Unlike the other segments an RF drive does not occupy the timeline; it
    spans whatever MW and free-evolution segments fall inside its window.
    """

    t_start: float
    t_stop: float
    v_ac: float
    f_ac: float
    phase: float = 0.0
    kind = "rf_drive"


@dataclass(frozen=True)
class Readout:
    duration: float = 300e-9
    kind = "readout"


Segment = Union[LaserInit, MwPulse, FreeEvolve, RfDrive, Readout]

SEGMENT_TYPES = {cls.kind: cls for cls in (LaserInit, MwPulse, FreeEvolve, RfDrive, Readout)}
