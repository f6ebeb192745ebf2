"""End-to-end experiment runners: simulate, analyze, report.

Each runner takes an :class:`~nvgmi.config.ExperimentConfig` and returns an
:class:`ExperimentResult` holding plain-data tables and a report document.
Nothing here reads the clock or global random state, so identical configs
give identical results regardless of the thread count.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import presets as P
from .config import ExperimentConfig
from .engine import Models, expected_signal, run
from .errors import InvalidArgument, NvGmiError
from .estimation import calibration, fitting, sensitivity, spectra
from .gmi import ac_field_at_nv, gmi_ratio, intrinsic_noise, permeability, skin_depth, stray_field
from .spin import FieldAtNv, ac_field_integral
from .sequences import build_hahn, build_odmr, build_rabi, build_ramsey, build_sync_magnetometry
from .widefield import default_sites, reconstruct, simulate_map


@dataclass(frozen=True)
class Table:
    """Named columns written as CSV or JSON."""

    columns: tuple
    data: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in zip(*self.data):
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {c: [_clean(float(v)) for v in col] for c, col in zip(self.columns, self.data)}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"


@dataclass
class ExperimentResult:
    experiment: str
    tables: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)


def derived_seed(master_seed: int, tag: int) -> int:
    """Independent 64-bit seed for an auxiliary run of one experiment."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(2**32 + tag,))
    return int(ss.generate_state(1, np.uint64)[0])


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_json(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=1, allow_nan=False) + "\n"


def resolve_models(cfg: ExperimentConfig, b_parallel=P.NV_BIAS, b_dc=0.0):
    nv = P.override(P.get("nv", cfg.presets["nv"]), cfg.overrides.get("nv", {}), "overrides.nv")
    wire = P.override(P.get("wire", cfg.presets["wire"]), cfg.overrides.get("wire", {}), "overrides.wire")
    return Models(nv, wire, b_parallel=b_parallel, b_dc=b_dc, preset_ids=dict(cfg.presets))


def _grid(cfg, start, stop, points):
    if cfg.sweep is not None:
        start, stop, points = cfg.sweep.start, cfg.sweep.stop, cfg.sweep.points
    return np.linspace(start, stop, points)


def _shots(cfg, default):
    return cfg.shots if cfg.shots is not None else default


def _param(cfg, name, default):
    return cfg.params.get(name, default)


def run_odmr(cfg, threads=1):
    freqs = _grid(cfg, 2.845e9, 2.895e9, 501)
    models = resolve_models(cfg, b_parallel=_param(cfg, "b_parallel", P.NV_BIAS))
    if "fwhm" in cfg.params:
        models = Models(P.override(models.nv, {"odmr_fwhm": cfg.params["fwhm"]}, "params"), models.wire, models.b_parallel, preset_ids=models.preset_ids)
    nv = models.nv
    seq, plan = build_odmr(freqs, nv, _shots(cfg, 10_000), cfg.seed)
    trace = run(seq, plan, models, threads)
    # four dips resolve once the Zeeman gap clears the linewidth
    resolved = 2 * nv.gyro_e * abs(models.b_parallel) > 2 * nv.odmr_fwhm
    fit = fitting.fit_lorentzian_multi(trace, 4 if resolved else 2)
    centers = [fit[f"center_{k}"] for k in range(4 if resolved else 2)]
    rep = {"fit": fit.to_document(), "centers": centers, "b_parallel": models.b_parallel}
    if resolved:
        rep["hyperfine_splitting"] = 0.5 * ((centers[1] - centers[0]) + (centers[3] - centers[2]))
        rep["zeeman_splitting"] = 0.5 * (centers[2] + centers[3] - centers[0] - centers[1])
        rep["field_estimate"] = float(calibration.field_from_centers(centers, nv.gyro_e))
    fwhm = np.mean([fit[f"fwhm_{k}"] for k in range(len(centers))])
    rep["linewidth_field_equivalent"] = float(sensitivity.shot_noise_dc_sensitivity(fwhm))
    return ExperimentResult("odmr", {"trace": trace}, rep)


def run_rabi(cfg, threads=1):
    models = resolve_models(cfg)
    seq, plan = build_rabi(_grid(cfg, 0.0, 300e-9, 151), models.nv, _shots(cfg, 10_000), cfg.seed)
    trace = run(seq, plan, models, threads)
    fit = fitting.fit_sinusoid(trace)
    period = fit["period"]
    rep = {"fit": fit.to_document(), "rabi_frequency": 1.0 / period, "pi_pulse": period / 2.0}
    return ExperimentResult("rabi", {"trace": trace}, rep)


def run_ramsey(cfg, threads=1):
    models = resolve_models(cfg)
    detuning = _param(cfg, "detuning", 5e6)
    seq, plan = build_ramsey(_grid(cfg, 2e-9, 4e-6, 2000), detuning, models.nv, _shots(cfg, 10_000), cfg.seed)
    trace = run(seq, plan, models, threads)
    spec = spectra.fft_spectrum(trace)
    peaks = spectra.peak_frequencies(spec, 2, f_min=0.5e6)
    rep = {
        "detuning": detuning,
        "fft_peaks": list(peaks),
        "fft_peak_separation": float(abs(peaks[1] - peaks[0])),
        "fft_bin_width": spec.df,
    }
    try:
        fit = fitting.fit_decay(trace, "exp", oscillations=2)
        rep["fit"] = fit.to_document()
        rep["t2_star"] = fit["time_constant"]
    except NvGmiError as exc:  # the FFT is the product; the fit is a bonus
        rep["fit_error"] = str(exc)
    table = Table(("frequency", "amplitude"), (spec.freqs, spec.amplitude))
    return ExperimentResult("ramsey", {"trace": trace, "fft": table}, rep)


def run_hahn(cfg, threads=1):
    models = resolve_models(cfg)
    tau = _grid(cfg, 0.25e-6, 25e-6, 200)
    n = _shots(cfg, 10_000)
    s0, p0 = build_hahn(tau, models.nv, 0.0, n, cfg.seed)
    s1, p1 = build_hahn(tau, models.nv, np.pi, n, derived_seed(cfg.seed, 1))
    t0 = run(s0, p0, models, threads)
    t1 = run(s1, p1, models, threads)
    pair = fitting.fit_hahn_pair(t0, t1, p=models.nv.stretch_p)
    rep = {"fit": pair.to_document(), "t2": pair["time_constant"], "exponent": models.nv.stretch_p}
    return ExperimentResult("hahn", {"trace": t0, "trace_180": t1}, rep)


def _magnetometry_trace(cfg, models, threads, v_ac=None, phi_prime=None, f_ac=None, seed=None, final_phase=None):
    two_tau = _param(cfg, "two_tau", P.OPERATING_TWO_TAU)
    seq, plan = build_sync_magnetometry(
        two_tau,
        _param(cfg, "v_ac", P.OPERATING_V_AC) if v_ac is None else v_ac,
        _param(cfg, "phi_prime", 0.0) if phi_prime is None else phi_prime,
        _param(cfg, "f_ac", None) if f_ac is None else f_ac,
        _grid(cfg, *P.OPERATING_WINDOW, P.OPERATING_POINTS),
        _shots(cfg, 500_000),
        cfg.seed if seed is None else seed,
        _param(cfg, "final_phase", 0.0) if final_phase is None else final_phase,
    )
    return seq, run(seq, plan, models, threads)


def run_magnetometry(cfg, threads=1):
    models = resolve_models(cfg)
    two_tau = _param(cfg, "two_tau", P.OPERATING_TWO_TAU)
    seq, trace = _magnetometry_trace(cfg, models, threads)
    rep = sensitivity.magnetometer_sensitivity(trace, two_tau, trace.shots)
    ramsey = float(sensitivity.shot_noise_dc_sensitivity(models.nv.odmr_fwhm))
    noise = P.get("noise", cfg.presets["noise"])
    doc = {
        "sensitivity": rep.to_document(),
        "eta_dc": rep.eta_dc,
        "sync_tag": seq.computed_sync_tag(),
        "ramsey_shot_noise_figure": ramsey,
        # linewidth figure against the sensitivity normalized to 1 s
        "improvement_ratio": ramsey / rep.eta_dc,
        "delta_b_per_fringe_half": float(sensitivity.delta_b_per_fringe_half(two_tau, models.nv.gyro_e)),
        "wire_intrinsic_noise": float(intrinsic_noise(models.wire, noise)),
    }
    return ExperimentResult("magnetometry", {"trace": trace}, doc)


CONTROL_VARIANTS = ("synchronized", "async_frequency", "async_phase", "no_rf")


def run_sweep_fac(cfg, threads=1):
    """Synchronized run against the three asynchronous controls, plus a
    noise-free fringe-amplitude scan over drive frequency."""
    models = resolve_models(cfg)
    two_tau = _param(cfg, "two_tau", P.OPERATING_TWO_TAU)
    v = _param(cfg, "v_ac", P.OPERATING_V_AC)
    f_sync = 1.0 / two_tau
    settings = {
        "synchronized": dict(v_ac=v, f_ac=f_sync, phi_prime=0.0),
        "async_frequency": dict(v_ac=v, f_ac=2.0 * f_sync, phi_prime=0.0),
        "async_phase": dict(v_ac=v, f_ac=f_sync, phi_prime=np.pi / 2),
        "no_rf": dict(v_ac=0.0, f_ac=f_sync, phi_prime=0.0),
    }
    tables, variants = {}, {}
    for k, name in enumerate(CONTROL_VARIANTS):
        seq, tr = _magnetometry_trace(cfg, models, threads, seed=derived_seed(cfg.seed, 10 + k), **settings[name])
        sigma = float(np.mean(tr.sigma))
        amp = fitting.sinusoid_amplitude_scan(tr.values, tr.mean_signal)
        info = {
            "sync_tag": seq.computed_sync_tag(),
            "f_ac": settings[name]["f_ac"],
            "phi_prime": settings[name]["phi_prime"],
            "v_ac": settings[name]["v_ac"],
            "point_sigma": sigma,
            "fringe_amplitude": amp,
            "expected_peak_to_peak": float(np.ptp(tr.expected)),
            "flat": bool(amp < 3.0 * sigma),
        }
        if name == "synchronized":
            fit = fitting.fit_sinusoid(tr)
            info["fringe_count"] = float(np.ptp(tr.values) / fit["period"])
            info["residual_fraction"] = fit.residual_rms / abs(fit["amplitude"])
            info["fit"] = fit.to_document()
        variants[name] = info
        tables[f"trace_{name}"] = tr

    # expected fringe count against f_ac: echo phase difference across the window
    mult = np.arange(0.25, 3.01, 0.25)
    b = _grid(cfg, *P.OPERATING_WINDOW, P.OPERATING_POINTS)
    counts = []
    for m in mult:
        b_ac = ac_field_at_nv(models.wire, v, m * f_sync, np.array([b[0], b[-1]]))
        unit = FieldAtNv.along_axis(0.0, ac_amplitude=1.0, ac_frequency=m * f_sync, ac_stop=two_tau)
        per_tesla = ac_field_integral(unit, 0.0, two_tau / 2) - ac_field_integral(unit, two_tau / 2, two_tau)
        counts.append(models.nv.gyro_e * abs(per_tesla * (b_ac[1] - b_ac[0])))
    tables["fac_scan"] = Table(("f_ac", "expected_fringes"), (mult * f_sync, np.array(counts)))
    return ExperimentResult("sweep-fac", tables, {"variants": variants})


def run_noise_floor(cfg, threads=1):
    """Count traces at the steepest fringe point and with all sources off.

    The per-bin count is the sum of ``shots_per_bin`` echo readouts plus
    ambient leakage; both traces are converted with the same slope.
    """
    models = resolve_models(cfg)
    two_tau = _param(cfg, "two_tau", P.OPERATING_TWO_TAU)
    duration = _param(cfg, "duration", 1.0)
    fs = _param(cfg, "sampling_rate", 1e3)
    ambient = _param(cfg, "ambient_rate", 14e3)
    seq, tr = _magnetometry_trace(cfg, models, threads)
    fit = fitting.fit_sinusoid(tr)
    c, period, phase = fit["amplitude"], fit["period"], fit["phase"]
    slope_shot = 2.0 * np.pi * abs(c) / period
    # steepest point nearest the window center: 2 pi b / P + phase = pi/2 (mod pi)
    center = 0.5 * (tr.values[0] + tr.values[-1])
    k = np.round((2.0 * np.pi * center / period + phase - np.pi / 2) / np.pi)
    b_op = (np.pi / 2 + k * np.pi - phase) * period / (2.0 * np.pi)
    lam_shot = expected_signal(seq, "b_dc", float(b_op), models)
    shots_per_bin = int(np.floor(1.0 / (fs * seq.total_duration)))
    if shots_per_bin < 1:
        raise InvalidArgument("sampling rate too high for one sequence per bin")
    n_bins = int(round(duration * fs))
    slope = slope_shot * shots_per_bin
    lam_ambient = ambient / fs
    rng_s = np.random.Generator(np.random.PCG64(np.random.SeedSequence(derived_seed(cfg.seed, 20))))
    rng_b = np.random.Generator(np.random.PCG64(np.random.SeedSequence(derived_seed(cfg.seed, 21))))
    sens = rng_s.poisson(shots_per_bin * lam_shot + lam_ambient, n_bins).astype(float)
    back = rng_b.poisson(lam_ambient, n_bins).astype(float)
    ns = spectra.noise_spectral_density(sens, fs, slope)
    nb = spectra.noise_spectral_density(back, fs, slope)
    oracle = lambda lam: math.sqrt(2.0 * lam / fs) / slope  # white Poisson floor
    rep = {
        "operating_field": float(b_op),
        "shots_per_bin": shots_per_bin,
        "slope_per_shot": slope_shot,
        "slope": slope,
        "sensitive": ns.to_document(),
        "background": nb.to_document(),
        "sensitive_oracle": oracle(shots_per_bin * lam_shot + lam_ambient),
        "background_oracle": oracle(lam_ambient),
        "ordering_preserved": bool(ns.mean_floor > nb.mean_floor),
    }
    t = np.arange(n_bins) / fs
    tables = {
        "trace": tr,
        "counts": Table(("time", "sensitive", "background"), (t, sens, back)),
        "spectrum": Table(("frequency", "sensitive", "background"), (ns.freqs, ns.density, nb.density)),
    }
    return ExperimentResult("noise-floor", tables, rep)


def coil_field(currents, slope=2.6e-3, linear_limit=60e-3, knee_width=10e-3, bias=P.NV_BIAS):
    """Coil field along the NV axis: linear core with tanh-saturating ends."""
    i = np.asarray(currents, dtype=float)
    a = np.abs(i)
    over = np.maximum(a - linear_limit, 0.0)
    if knee_width > 0:
        mag = np.where(a <= linear_limit, a, linear_limit + knee_width * np.tanh(over / knee_width))
    else:
        mag = np.minimum(a, linear_limit)
    return bias + slope * np.sign(i) * mag


def run_calibrate(cfg, threads=1):
    models = resolve_models(cfg)
    slope = _param(cfg, "coil_slope", 2.6e-3)
    currents = _grid(cfg, -100e-3, 100e-3, 41)
    fields = coil_field(currents, slope, _param(cfg, "linear_limit", 60e-3), _param(cfg, "knee_width", 10e-3), _param(cfg, "bias", P.NV_BIAS))
    freqs = np.linspace(2.845e9, 2.895e9, 501)
    traces = []
    for k, (i, b) in enumerate(zip(currents, fields)):
        m = Models(models.nv, models.wire, b_parallel=float(b), preset_ids=models.preset_ids)
        seq, plan = build_odmr(freqs, m.nv, _shots(cfg, 10_000), derived_seed(cfg.seed, 100 + k))
        traces.append(run(seq, plan, m, threads))
    cal = calibration.calibrate_coil(currents, traces, models.nv.gyro_e)
    rep = {
        "calibration": cal.to_document(),
        "slope": cal.slope,
        "true_slope": slope,
        "slope_relative_error": abs(cal.slope - slope) / slope,
        "linear_limit": _param(cfg, "linear_limit", 60e-3),
    }
    table = Table(("current", "field", "true_field"), (currents, cal.fields, fields))
    return ExperimentResult("calibrate", {"trace": table}, rep)


def run_widefield(cfg, threads=1):
    chain = P.get("chain", cfg.presets["chain"])
    step = _param(cfg, "spacing", 2.5e-6)
    x = np.arange(0.0, 50e-6 + step / 2, step)
    y = np.arange(-20e-6, 20e-6 + step / 2, step)
    cells, shape = default_sites(x, y, offset=_param(cfg, "offset", 0.05e-6))
    fmap = reconstruct(simulate_map(chain, cells), shape)
    centers = np.column_stack([fmap.x, fmap.y, np.full(len(fmap.x), -12.5e-6)])
    truth = stray_field(chain, centers)
    rec = fmap.vectors
    # B and -B are indistinguishable; compare modulo the global sign
    err = np.minimum(np.linalg.norm(rec - truth, axis=1), np.linalg.norm(rec + truth, axis=1)) / np.linalg.norm(truth, axis=1)
    rep = {
        "cells": len(cells),
        "shape": list(shape),
        "valid_cells": int(fmap.valid.sum()),
        "flagged_cells": int(fmap.flagged.sum()),
        "max_relative_error": float(np.nanmax(err)),
        "b_abs_range": [float(np.nanmin(fmap.b_abs)), float(np.nanmax(fmap.b_abs))],
    }
    return ExperimentResult("widefield", {"trace": fmap}, rep)


def run_gmi_curve(cfg, threads=1):
    """Impedance-ratio surface over drive frequency and axial bias."""
    models = resolve_models(cfg)
    wire = models.wire
    f = np.geomspace(_param(cfg, "f_min", 10e3), _param(cfg, "f_max", 10e6), 31)
    h = np.linspace(-_param(cfg, "h_max", 2 * wire.h_sat), _param(cfg, "h_max", 2 * wire.h_sat), 81)
    ff, hh = np.meshgrid(f, h, indexing="ij")
    ratio = np.asarray(gmi_ratio(wire, ff, hh))
    a_over_delta = wire.radius_a / skin_depth(f, permeability(wire, 0.0), wire.resistivity_rho)
    imax = np.unravel_index(np.argmax(ratio), ratio.shape)
    rep = {
        "max_ratio": float(ratio[imax]),
        "frequency_at_max": float(f[imax[0]]),
        "bias_at_max": float(h[imax[1]]),
        "peak_ratio_by_frequency": ratio.max(axis=1),
        "a_over_delta_zero_bias": a_over_delta,
    }
    table = Table(("f_ac", "h_dc", "gmi_ratio"), (ff.ravel(), hh.ravel(), ratio.ravel()))
    return ExperimentResult("gmi-curve", {"trace": table}, rep)


RUNNERS = {
    "odmr": run_odmr,
    "rabi": run_rabi,
    "ramsey": run_ramsey,
    "hahn": run_hahn,
    "magnetometry": run_magnetometry,
    "sweep-fac": run_sweep_fac,
    "noise-floor": run_noise_floor,
    "calibrate": run_calibrate,
    "widefield": run_widefield,
    "gmi-curve": run_gmi_curve,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    if threads < 1:
        raise InvalidArgument("threads must be >= 1")
    return RUNNERS[cfg.experiment](cfg, threads)
