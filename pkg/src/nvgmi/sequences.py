"""Validated pulse sequences, sweep plans and the protocol builders."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import InvalidArgument, ProtocolError
from .spin import NvParams
from .timeline import SEGMENT_TYPES, FreeEvolve, LaserInit, MwPulse, Readout, RfDrive

SYNC_TAGS = ("synchronized", "async_frequency", "async_phase", "no_rf")
SWEEP_VARIABLES = ("mw_frequency", "mw_duration", "tau", "b_dc", "v_ac")

# relative tolerance of the f_ac * 2 tau = 1 matching test
_SYNC_RTOL = 1e-9


def _wrap_phase(phi: float) -> float:
    w = float(np.mod(phi, 2.0 * np.pi))
    return 0.0 if np.isclose(w, 0.0, atol=1e-12) or np.isclose(w, 2.0 * np.pi, atol=1e-12) else w


def _jsonable(value):
    if value is None or isinstance(value, (bool, int, str)):
        return value
    v = float(value)
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass(frozen=True)
class PulseSequence:
    """Ordered timeline of segments.

    Layout rules: a single ``LaserInit`` precedes every MW pulse, a single
    ``Readout`` closes the sequence, and non-RF segments are laid end to end.
    RF drives overlay the timeline; their window must lie inside it.  When
    ``sync_tag`` is omitted it is derived from the segment data, otherwise the
    declared tag must agree with the derived one.
    """

    segments: tuple
    sync_tag: str | None = None
    label: str = ""

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        self._validate()
        tag = self.computed_sync_tag()
        if self.sync_tag is None:
            object.__setattr__(self, "sync_tag", tag)
        elif self.sync_tag not in SYNC_TAGS:
            raise ProtocolError(f"unknown sync_tag {self.sync_tag!r}")
        elif self.sync_tag != tag:
            idx = next((i for i, s in enumerate(segs) if isinstance(s, RfDrive)), 0)
            raise ProtocolError(f"declared sync_tag {self.sync_tag!r} but segment data give {tag!r}", idx)

    def _validate(self):
        segs = self.segments
        if not segs:
            raise ProtocolError("empty sequence")
        for i, s in enumerate(segs):
            if type(s) not in SEGMENT_TYPES.values():
                raise ProtocolError(f"unknown segment kind {type(s).__name__}", i)
            if not isinstance(s, RfDrive) and not (np.isfinite(s.duration) and s.duration >= 0):
                raise ProtocolError("duration must be finite and non-negative", i)
        inits = [i for i, s in enumerate(segs) if isinstance(s, LaserInit)]
        pulses = [i for i, s in enumerate(segs) if isinstance(s, MwPulse)]
        reads = [i for i, s in enumerate(segs) if isinstance(s, Readout)]
        if len(inits) != 1:
            raise ProtocolError("exactly one LaserInit required", inits[1] if inits else 0)
        if pulses and inits[0] > pulses[0]:
            raise ProtocolError("LaserInit must precede the first MwPulse", pulses[0])
        last_timed = max(i for i, s in enumerate(segs) if not isinstance(s, RfDrive))
        if len(reads) != 1 or reads[0] != last_timed:
            raise ProtocolError("exactly one Readout required, at the end", reads[-1] if reads else len(segs) - 1)
        total = self.total_duration
        for i, s in enumerate(segs):
            if isinstance(s, RfDrive):
                if not (0 <= s.t_start < s.t_stop <= total * (1 + 1e-12)):
                    raise ProtocolError("RF window must lie inside the timeline", i)
                if s.v_ac < 0 or s.f_ac < 0 or not np.isfinite(s.phase):
                    raise ProtocolError("RF drive needs v_ac >= 0, f_ac >= 0, finite phase", i)

    @property
    def timed(self):
        return [s for s in self.segments if not isinstance(s, RfDrive)]

    @property
    def rf_drives(self):
        return [s for s in self.segments if isinstance(s, RfDrive)]

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.timed))

    @property
    def free_evolution_time(self) -> float:
        """Total free-evolution time (2 tau for an echo)."""
        return float(sum(s.duration for s in self.segments if isinstance(s, FreeEvolve)))

    @property
    def refocused(self) -> bool:
        """True when a pi pulse sits between two free-evolution periods."""
        seen_free = False
        pending_pi = False
        for s in self.timed:
            if isinstance(s, FreeEvolve) and s.duration > 0:
                if pending_pi:
                    return True
                seen_free = True
            elif isinstance(s, MwPulse) and seen_free and np.isclose(abs(s.angle), np.pi):
                pending_pi = True
        return False

    def start_times(self):
        """Start time of every segment (RF drives report their window start)."""
        t = 0.0
        out = []
        for s in self.segments:
            if isinstance(s, RfDrive):
                out.append(s.t_start)
            else:
                out.append(t)
                t += s.duration
        return out

    def free_window(self):
        """(start, stop) of the span covered by free-evolution segments."""
        starts = self.start_times()
        idx = [i for i, s in enumerate(self.segments) if isinstance(s, FreeEvolve)]
        if not idx:
            return (0.0, 0.0)
        return (starts[idx[0]], starts[idx[-1]] + self.segments[idx[-1]].duration)

    def computed_sync_tag(self) -> str:
        drives = [d for d in self.rf_drives if d.v_ac > 0]
        if not drives:
            return "no_rf"
        d = drives[0]
        two_tau = self.free_evolution_time
        if two_tau <= 0 or not np.isclose(d.f_ac * two_tau, 1.0, rtol=_SYNC_RTOL, atol=0):
            return "async_frequency"
        if _wrap_phase(d.phase) != 0.0:
            return "async_phase"
        return "synchronized"

    def to_document(self) -> dict:
        segs = []
        for s in self.segments:
            entry = {"kind": s.kind}
            for f in fields(s):
                entry[f.name] = _jsonable(getattr(s, f.name))
            segs.append(entry)
        return {"label": self.label, "segments": segs, "sync_tag": self.sync_tag}

    def canonical(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @classmethod
    def from_document(cls, doc: dict) -> "PulseSequence":
        segs = []
        for i, entry in enumerate(doc["segments"]):
            entry = dict(entry)
            kind = entry.pop("kind")
            if kind not in SEGMENT_TYPES:
                raise ProtocolError(f"unknown segment kind {kind!r}", i)
            entry = {k: (float(v) if isinstance(v, str) and v in ("inf", "-inf") else v) for k, v in entry.items()}
            segs.append(SEGMENT_TYPES[kind](**entry))
        return cls(tuple(segs), doc.get("sync_tag"), doc.get("label", ""))


@dataclass(frozen=True)
class SweepPlan:
    variable: str
    values: np.ndarray
    shots_per_point: int
    master_seed: int

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise InvalidArgument(f"unknown sweep variable {self.variable!r}")
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size == 0:
            raise InvalidArgument("sweep values are empty")
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("sweep values must be finite")
        d = np.diff(v)
        if v.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidArgument("sweep values must be strictly monotone")
        if int(self.shots_per_point) != self.shots_per_point or self.shots_per_point < 1:
            raise InvalidArgument("shots_per_point must be a positive integer")
        seed = int(self.master_seed)
        if seed != self.master_seed or not 0 <= seed < 2**64:
            raise InvalidArgument("master_seed must be an integer in [0, 2**64)")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "shots_per_point", int(self.shots_per_point))
        object.__setattr__(self, "master_seed", seed)

    def to_document(self) -> dict:
        return {
            "variable": self.variable,
            "values": [float(x) for x in self.values],
            "shots_per_point": self.shots_per_point,
            "master_seed": self.master_seed,
        }

    def with_values(self, values) -> "SweepPlan":
        return replace(self, values=values)


def _as_values(values, name):
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise InvalidArgument(f"{name} is empty")
    return v


def _echo_segments(tau, final_phase=0.0, laser=3e-6, readout=300e-9):
    return [
        LaserInit(laser),
        MwPulse(np.pi / 2),
        FreeEvolve(tau),
        MwPulse(np.pi),
        FreeEvolve(tau),
        MwPulse(np.pi / 2, phase=final_phase),
        Readout(readout),
    ]


def build_odmr(freq_range, params: NvParams, shots=10_000, seed=0):
    """CW ODMR sweep over ``freq_range`` (Hz).

    The returned template carries a single saturating MW segment; the engine
    evaluates ODMR from the Lorentzian line shape rather than by evolving it.
    """
    f = _as_values(freq_range, "freq_range")
    if not f.min() < params.zero_field_splitting_D < f.max():
        raise InvalidArgument("frequency range must bracket the zero-field splitting")
    seq = PulseSequence((LaserInit(), MwPulse(np.pi), Readout()), label="odmr")
    return seq, SweepPlan("mw_frequency", f, shots, seed)


def build_rabi(duration_range, params: NvParams, shots=10_000, seed=0):
    """Resonant finite-duration MW pulse of swept length."""
    t = _as_values(duration_range, "duration_range")
    seq = PulseSequence((LaserInit(), MwPulse(0.0, duration=0.0), Readout()), label="rabi")
    return seq, SweepPlan("mw_duration", t, shots, seed)


def build_ramsey(tau_range, detuning, params: NvParams, shots=10_000, seed=0):
    """pi/2 - tau - pi/2 with the carrier offset by ``detuning`` (Hz)."""
    tau = _as_values(tau_range, "tau_range")
    if np.any(tau <= 0):
        raise InvalidArgument("tau values must be positive")
    seq = PulseSequence(
        (LaserInit(), MwPulse(np.pi / 2, detuning=detuning), FreeEvolve(float(tau[0])), MwPulse(np.pi / 2, detuning=detuning), Readout()),
        label="ramsey",
    )
    return seq, SweepPlan("tau", tau, shots, seed)


def build_hahn(tau_range, params: NvParams, final_phase=0.0, shots=10_000, seed=0):
    """Hahn echo swept in the per-arm delay tau.

    ``final_phase = pi`` gives the inverted-readout variant.
    """
    tau = _as_values(tau_range, "tau_range")
    if np.any(tau <= 0):
        raise InvalidArgument("tau values must be positive")
    seq = PulseSequence(tuple(_echo_segments(float(tau[0]), final_phase)), label="hahn")
    return seq, SweepPlan("tau", tau, shots, seed)


def build_sync_magnetometry(two_tau, v_ac, phi_prime=0.0, f_ac_override=None, b_dc_values=(), shots=500_000, seed=0, final_phase=0.0):
    """Hahn echo with a concurrent RF drive on the wire, swept in external field.

    The drive spans both free-evolution arms and starts at the first
    pi/2 pulse.  ``f_ac`` defaults to ``1/two_tau``.
    """
    if two_tau <= 0:
        raise InvalidArgument("two_tau must be positive")
    b = _as_values(b_dc_values, "b_dc_values")
    f_ac = 1.0 / two_tau if f_ac_override is None else float(f_ac_override)
    segs = _echo_segments(two_tau / 2.0, final_phase)
    t0 = segs[0].duration
    segs.insert(1, RfDrive(t0, t0 + two_tau, float(v_ac), f_ac, float(phi_prime)))
    seq = PulseSequence(tuple(segs), label="sync_magnetometry")
    return seq, SweepPlan("b_dc", b, shots, seed)


def with_tau(seq: PulseSequence, tau: float) -> PulseSequence:
    """Copy of ``seq`` with every free-evolution arm set to ``tau``.

    RF windows are stretched to cover the new free-evolution span.
    """
    segs = [FreeEvolve(tau) if isinstance(s, FreeEvolve) else s for s in seq.segments]
    probe = PulseSequence(tuple(s for s in segs if not isinstance(s, RfDrive)), label=seq.label)
    lo, hi = probe.free_window()
    segs = [replace(s, t_start=lo, t_stop=hi) if isinstance(s, RfDrive) else s for s in segs]
    return PulseSequence(tuple(segs), label=seq.label)


def with_rabi_duration(seq: PulseSequence, duration: float, rabi_freq: float) -> PulseSequence:
    segs = [
        replace(s, duration=duration, angle=2.0 * np.pi * rabi_freq * duration) if isinstance(s, MwPulse) else s
        for s in seq.segments
    ]
    return PulseSequence(tuple(segs), label=seq.label)


def with_drive(seq: PulseSequence, **changes) -> PulseSequence:
    segs = [replace(s, **changes) if isinstance(s, RfDrive) else s for s in seq.segments]
    return PulseSequence(tuple(segs), label=seq.label)
