"""NV ground-state spin model.

The addressed m_s = 0 <-> m_s = -1 manifold is treated as a pseudo-spin 1/2.
The Bloch vector points to +z for the bright m_s = 0 state and to -z for the
dark m_s = -1 state.  The unpolarized 15N nucleus splits the transition into
two hyperfine branches which are evolved independently and mixed
incoherently with equal weights.

Dephasing is deterministic: the transverse Bloch components are multiplied
by ``exp(-(t/T)**p)`` evaluated on the total free-evolution time, which
reproduces the fit models used for Ramsey and Hahn-echo data.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .constants import GYRO_E, HYPERFINE_15N, LINEAR_ZEEMAN_LIMIT, ZERO_FIELD_SPLITTING
from .errors import InvalidArgument, ProtocolError
from .timeline import FreeEvolve, LaserInit, MwPulse, Readout, RfDrive


@dataclass(frozen=True)
class NvParams:
    """Physical parameters of a single NV center.

    ``photons_bright`` is the mean photon number collected per readout shot
    from the bright state and ``contrast_c`` the fractional dip of the dark
    state.  ``odmr_fwhm`` and ``odmr_depth`` describe the CW line shape used
    for ODMR synthesis only.
    """

    zero_field_splitting_D: float = ZERO_FIELD_SPLITTING
    gyro_e: float = GYRO_E
    hyperfine_A: float = HYPERFINE_15N
    t2_star: float = 0.69e-6
    t2: float = 21e-6
    stretch_p: float = 2.0
    rabi_freq: float = 10e6
    contrast_c: float = 0.3
    photons_bright: float = 3.0
    odmr_fwhm: float = 0.9e6
    odmr_depth: float = 0.1

    def __post_init__(self):
        if not 0 < self.t2_star <= self.t2:
            raise InvalidArgument("need 0 < t2_star <= t2")
        if not 0 < self.contrast_c <= 1:
            raise InvalidArgument("contrast_c must lie in (0, 1]")
        if self.photons_bright <= 0:
            raise InvalidArgument("photons_bright must be positive")
        if self.stretch_p < 1:
            raise InvalidArgument("stretch_p must be >= 1")
        if self.rabi_freq <= 0 or self.odmr_fwhm <= 0:
            raise InvalidArgument("rabi_freq and odmr_fwhm must be positive")
        if not 0 <= self.odmr_depth < 1:
            raise InvalidArgument("odmr_depth must lie in [0, 1)")


@dataclass(frozen=True)
class Decay:
    """Stretched-exponential coherence envelope exp(-(t/time_constant)**exponent)."""

    time_constant: float
    exponent: float = 1.0

    def envelope(self, t):
        return np.exp(-((np.asarray(t, dtype=float) / self.time_constant) ** self.exponent))


def dephasing(params: NvParams, refocused: bool) -> Decay:
    """Envelope for unrefocused (T2*, p = 1) or echo (T2, stretch_p) sequences."""
    if refocused:
        return Decay(params.t2, params.stretch_p)
    return Decay(params.t2_star, 1.0)


@dataclass(frozen=True)
class FieldAtNv:
    """Magnetic environment of the NV.

    The AC part is ``ac_amplitude*sin(2*pi*ac_frequency*(t - ac_start) + ac_phase)``
    along the NV axis for ``ac_start <= t < ac_stop`` and zero elsewhere.
    """

    b_static: tuple = (0.0, 0.0, 0.0)
    nv_axis: tuple = (0.0, 0.0, 1.0)
    ac_amplitude: float = 0.0
    ac_frequency: float = 0.0
    ac_phase: float = 0.0
    ac_start: float = 0.0
    ac_stop: float = np.inf

    def __post_init__(self):
        axis = np.asarray(self.nv_axis, dtype=float)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or norm == 0:
            raise InvalidArgument("nv_axis must be a non-zero 3-vector")
        object.__setattr__(self, "nv_axis", tuple(axis / norm))
        object.__setattr__(self, "b_static", tuple(float(b) for b in self.b_static))

    @classmethod
    def along_axis(cls, b_parallel: float, **ac) -> "FieldAtNv":
        return cls(b_static=(0.0, 0.0, float(b_parallel)), nv_axis=(0.0, 0.0, 1.0), **ac)

    @property
    def b_parallel(self) -> float:
        return float(np.dot(self.b_static, self.nv_axis))


@dataclass(frozen=True)
class SpinState:
    """Bloch vectors of the hyperfine branches plus bookkeeping clocks.

    ``clock`` is the time since the start of the sequence and ``free_time``
    the free-evolution time accumulated since the last optical reset.
    """

    branches: np.ndarray = field(default_factory=lambda: np.tile([0.0, 0.0, 1.0], (2, 1)))
    hf_branch_weights: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    clock: float = 0.0
    free_time: float = 0.0
    carrier: Optional[float] = None

    def __post_init__(self):
        b = np.array(self.branches, dtype=float, copy=True).reshape(-1, 3)
        w = np.array(self.hf_branch_weights, dtype=float, copy=True).reshape(-1)
        if len(w) != len(b):
            raise InvalidArgument("one weight per hyperfine branch required")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-12):
            raise InvalidArgument("hyperfine weights must be non-negative and sum to 1")
        b.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "branches", b)
        object.__setattr__(self, "hf_branch_weights", w)

    @property
    def bloch(self) -> np.ndarray:
        return self.hf_branch_weights @ self.branches

    @property
    def p_dark(self) -> float:
        """Population of m_s = -1 averaged over the branches."""
        return float(np.clip((1.0 - self.bloch[2]) / 2.0, 0.0, 1.0))


def _finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise InvalidArgument(f"non-finite input {v!r}")


def transition_frequencies(params: NvParams, b_parallel: float) -> np.ndarray:
    """Four ODMR transition frequencies (Hz), sorted ascending.

    ``D -/+ gyro_e*B_par`` for m_s = -1 / +1, each split by +/- A/2.
    """
    _finite(b_parallel)
    if abs(b_parallel) >= LINEAR_ZEEMAN_LIMIT:
        raise InvalidArgument("field outside the linear-Zeeman regime (|B| < 10 mT)")
    zeeman = params.gyro_e * b_parallel
    half = params.hyperfine_A / 2.0
    d = params.zero_field_splitting_D
    return np.sort(np.array([d - zeeman - half, d - zeeman + half, d + zeeman - half, d + zeeman + half]))


def branch_frequencies(params: NvParams, b_parallel: float) -> np.ndarray:
    """Hyperfine branch frequencies of the addressed m_s = 0 <-> -1 transition."""
    centre = params.zero_field_splitting_D - params.gyro_e * b_parallel
    half = params.hyperfine_A / 2.0
    return np.array([centre - half, centre + half])


def odmr_signal(freqs, params: NvParams, b_parallel: float, fwhm=None, depth=None) -> np.ndarray:
    """Normalized CW fluorescence: 1 minus four Lorentzian dips."""
    freqs = np.asarray(freqs, dtype=float)
    fwhm = params.odmr_fwhm if fwhm is None else fwhm
    depth = params.odmr_depth if depth is None else depth
    hw2 = (fwhm / 2.0) ** 2
    dips = sum(hw2 / ((freqs - f0) ** 2 + hw2) for f0 in transition_frequencies(params, b_parallel))
    return 1.0 - depth * dips


def ac_field_integral(field: FieldAtNv, t_a: float, t_b: float) -> float:
    """Closed-form integral of the AC field over [t_a, t_b] (T*s)."""
    lo = max(t_a, field.ac_start)
    hi = min(t_b, field.ac_stop)
    if hi <= lo or field.ac_amplitude == 0.0:
        return 0.0
    if field.ac_frequency == 0.0:
        return field.ac_amplitude * np.sin(field.ac_phase) * (hi - lo)
    w = 2.0 * np.pi * field.ac_frequency
    t0 = field.ac_start
    return field.ac_amplitude / w * (np.cos(w * (lo - t0) + field.ac_phase) - np.cos(w * (hi - t0) + field.ac_phase))


def _rotate(vectors: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    cross = np.cross(axis, vectors)
    dot = vectors @ axis
    return vectors * c + cross * s + np.outer(dot, axis) * (1.0 - c)


def evolve(state: SpinState, segment, field: FieldAtNv, params: NvParams, decay: Optional[Decay] = None) -> SpinState:
    """Advance ``state`` through one timeline segment.

    MW pulses are exact rotations about the in-plane axis
    ``(cos(phase), sin(phase), 0)``.  Free evolution precesses each branch
    about z by ``2*pi*(detuning*t + gyro_e*integral(b_ac))`` and applies
    ``decay`` (if given) as a ratio of envelopes, so that a sequence of free
    periods ends up damped by the envelope of their summed duration.
    """
    if isinstance(segment, LaserInit):
        if segment.duration < 0:
            raise InvalidArgument("negative duration")
        n = len(state.branches)
        return SpinState(np.tile([0.0, 0.0, 1.0], (n, 1)), state.hf_branch_weights, state.clock + segment.duration, 0.0, None)

    if isinstance(segment, MwPulse):
        if segment.duration < 0:
            raise InvalidArgument("negative duration")
        _finite(segment.angle, segment.phase)
        axis = np.array([np.cos(segment.phase), np.sin(segment.phase), 0.0])
        carrier = segment.carrier
        if carrier is None:
            carrier = float(np.mean(branch_frequencies(params, field.b_parallel)))
        return replace(
            state,
            branches=_rotate(state.branches, axis, segment.angle),
            clock=state.clock + segment.duration,
            carrier=carrier + segment.detuning,
        )

    if isinstance(segment, FreeEvolve):
        t = segment.duration
        if t < 0:
            raise InvalidArgument("negative duration")
        carrier = state.carrier
        if carrier is None:
            carrier = float(np.mean(branch_frequencies(params, field.b_parallel)))
        detunings = carrier - branch_frequencies(params, field.b_parallel)
        ac = params.gyro_e * ac_field_integral(field, state.clock, state.clock + t)
        phases = 2.0 * np.pi * (detunings * t + ac)
        c, s = np.cos(phases), np.sin(phases)
        b = state.branches
        x = b[:, 0] * c - b[:, 1] * s
        y = b[:, 0] * s + b[:, 1] * c
        if decay is not None:
            ratio = np.exp(
                (state.free_time / decay.time_constant) ** decay.exponent
                - ((state.free_time + t) / decay.time_constant) ** decay.exponent
            )
            x, y = x * ratio, y * ratio
        return replace(
            state,
            branches=np.column_stack([x, y, b[:, 2]]),
            clock=state.clock + t,
            free_time=state.free_time + t,
        )

    if isinstance(segment, RfDrive):
        # the drive reaches the spin only through ``field``
        return state

    if isinstance(segment, Readout):
        if segment.duration < 0:
            raise InvalidArgument("negative duration")
        return replace(state, clock=state.clock + segment.duration)

    raise ProtocolError(f"unknown segment kind {type(segment).__name__}")


class ReadoutResult(NamedTuple):
    counts: Optional[np.ndarray]
    mean: float
    expected: float


def expected_counts(state: SpinState, params: NvParams) -> float:
    return params.photons_bright * (1.0 - params.contrast_c * state.p_dark)


def readout(state: SpinState, params: NvParams, shots: int, rng: np.random.Generator, aggregate: bool = False) -> ReadoutResult:
    """Photon-counting readout over ``shots`` repetitions.

    Each shot is Poisson with mean ``photons_bright*(1 - contrast_c*p_dark)``.
    With ``aggregate=True`` only the total is drawn, as a single Poisson
    variate of mean ``shots*lambda``; this has the same distribution for the
    shot average and skips the per-shot array.
    """
    if int(shots) != shots or shots < 1:
        raise InvalidArgument("shots must be a positive integer")
    shots = int(shots)
    lam = expected_counts(state, params)
    if aggregate:
        total = rng.poisson(lam * shots)
        return ReadoutResult(None, total / shots, lam)
    counts = rng.poisson(lam, size=shots)
    return ReadoutResult(counts, float(counts.mean()), lam)
