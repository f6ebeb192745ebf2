"""Execution of pulse sequences against the spin and wire models."""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ProtocolError
from .gmi import GmiWire, ac_field_at_nv
from .sequences import PulseSequence, SweepPlan, with_drive, with_rabi_duration, with_tau
from .spin import FieldAtNv, NvParams, SpinState, dephasing, evolve, expected_counts, odmr_signal
from .timeline import RfDrive


@dataclass(frozen=True)
class Models:
    """Everything a run needs besides the sequence and the plan.

    ``b_parallel`` is the static bias along the NV axis (the domain stray
    field); ``b_dc`` is the external field along the wire, used when it is
    not the swept variable.
    """

    nv: NvParams
    wire: GmiWire | None = None
    b_parallel: float = 0.0
    b_dc: float = 0.0
    decay: bool = True
    preset_ids: dict = field(default_factory=dict)


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Independent generator for sweep point ``index``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def _field_for(seq: PulseSequence, models: Models, b_dc: float) -> FieldAtNv:
    drives = [d for d in seq.rf_drives if d.v_ac > 0]
    if not drives:
        return FieldAtNv.along_axis(models.b_parallel)
    if len(drives) > 1:
        idx = [i for i, s in enumerate(seq.segments) if isinstance(s, RfDrive) and s.v_ac > 0][1]
        raise ProtocolError("at most one active RF drive supported", idx)
    if models.wire is None:
        raise InvalidArgument("an RF drive needs a wire model")
    d = drives[0]
    b_ac = float(ac_field_at_nv(models.wire, d.v_ac, d.f_ac, b_dc))
    return FieldAtNv.along_axis(
        models.b_parallel, ac_amplitude=b_ac, ac_frequency=d.f_ac, ac_phase=d.phase, ac_start=d.t_start, ac_stop=d.t_stop
    )


def final_state(seq: PulseSequence, models: Models, b_dc: float | None = None) -> SpinState:
    b_dc = models.b_dc if b_dc is None else b_dc
    fld = _field_for(seq, models, b_dc)
    decay = dephasing(models.nv, seq.refocused) if models.decay else None
    state = SpinState()
    for seg in seq.timed:
        state = evolve(state, seg, fld, models.nv, decay)
    return state


def point_sequence(seq: PulseSequence, variable: str, value: float, nv: NvParams) -> PulseSequence:
    if variable == "mw_duration":
        return with_rabi_duration(seq, value, nv.rabi_freq)
    if variable == "tau":
        return with_tau(seq, value)
    if variable == "v_ac":
        return with_drive(seq, v_ac=value)
    return seq


def expected_signal(seq: PulseSequence, variable: str, value: float, models: Models) -> float:
    """Noise-free mean photons per shot at one sweep point."""
    nv = models.nv
    if variable == "mw_frequency":
        return float(nv.photons_bright * odmr_signal(value, nv, models.b_parallel))
    b_dc = value if variable == "b_dc" else models.b_dc
    state = final_state(point_sequence(seq, variable, value, nv), models, b_dc)
    return expected_counts(state, nv)


@dataclass(frozen=True)
class Trace:
    variable: str
    values: np.ndarray
    mean_signal: np.ndarray
    sigma: np.ndarray
    expected: np.ndarray
    shots: int
    metadata: dict
    raw_counts: np.ndarray | None = None

    def __post_init__(self):
        if not len(self.values) == len(self.mean_signal) == len(self.sigma) == len(self.expected):
            raise InvalidArgument("trace columns differ in length")

    def __len__(self):
        return len(self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.variable},mean_signal,sigma\n")
        for v, m, s in zip(self.values, self.mean_signal, self.sigma):
            buf.write(f"{float(v)!r},{float(m)!r},{float(s)!r}\n")
        return buf.getvalue()

    def to_document(self) -> dict:
        return {
            "variable": self.variable,
            "values": [float(x) for x in self.values],
            "mean_signal": [float(x) for x in self.mean_signal],
            "sigma": [float(x) for x in self.sigma],
            "expected": [float(x) for x in self.expected],
            "shots": self.shots,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=1) + "\n"


def run(seq: PulseSequence, plan: SweepPlan, models: Models, threads: int = 1, keep_counts: bool = False) -> Trace:
    """Execute ``seq`` at every point of ``plan``.

    Point ``i`` draws its shots from ``substream(plan.master_seed, i)`` so
    the result does not depend on evaluation order or thread count.  With
    ``keep_counts`` the per-shot counts are drawn and stored; otherwise the
    shot total is drawn directly as a single Poisson variate.
    """
    if plan.variable == "mw_frequency" and seq.label != "odmr":
        raise ProtocolError("mw_frequency sweeps are only defined for the ODMR template")
    n = plan.shots_per_point

    def point(i):
        lam = expected_signal(seq, plan.variable, float(plan.values[i]), models)
        rng = substream(plan.master_seed, i)
        if keep_counts:
            counts = rng.poisson(lam, size=n)
            return lam, counts.mean(), counts
        return lam, rng.poisson(lam * n) / n, None

    idx = range(len(plan.values))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, idx))
    else:
        results = [point(i) for i in idx]

    expected = np.array([r[0] for r in results])
    mean = np.array([r[1] for r in results], dtype=float)
    counts = np.stack([r[2] for r in results]) if keep_counts else None
    meta = {
        "sequence_sha256": seq.sha256(),
        "sequence_label": seq.label,
        "sync_tag": seq.sync_tag,
        "master_seed": plan.master_seed,
        "presets": dict(models.preset_ids),
        "measurement_time": n * seq.free_evolution_time,
    }
    sigma = np.sqrt(np.maximum(mean, 0.0) / n)
    return Trace(plan.variable, plan.values, mean, sigma, expected, n, meta, counts)
