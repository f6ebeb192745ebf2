"""Built-in parameter presets.

The default wire's transduction gain is calibrated so that, at 2 tau =
10 us and v_ac = 1 V, the external-field window ``OPERATING_WINDOW``
(150 uT centered near the steepest impedance slope) holds six echo fringes.
``calibrated_gain`` reproduces the stored value.
"""

from __future__ import annotations

import json
from dataclasses import asdict, fields, replace

import numpy as np

from .constants import GYRO_E, MU_0
from .errors import ConfigError
from .gmi import DomainChain, GmiWire, NoiseParams, impedance
from .spin import NvParams

OPERATING_TWO_TAU = 10e-6
OPERATING_V_AC = 1.0
# external DC field window of the magnetometry sweep (T)
OPERATING_WINDOW = (0.975e-3, 1.125e-3)
OPERATING_POINTS = 101
OPERATING_FRINGES = 6
# static bias along the NV axis from the wire's domains (T)
NV_BIAS = 0.5e-3

_PLATED_GAIN = 2.4965

NV_PRESETS = {
    "paper-nv": NvParams(t2_star=0.69e-6, t2=21e-6, stretch_p=2.0, rabi_freq=10e6, contrast_c=0.3, photons_bright=3.0, odmr_fwhm=0.9e6, odmr_depth=0.1),
}

_WIRE_BASE = dict(radius_a=12.5e-6, length_l=30e-3, resistivity_rho=1.3e-6, r_dc=10.2, standoff_r=20e-6)

WIRE_PRESETS = {
    "plated": GmiWire(**_WIRE_BASE, mu_max=5e4, h_k=1500.0, h_sat=30000.0, transduction_gain_G=_PLATED_GAIN),
    "pristine": GmiWire(**_WIRE_BASE, mu_max=2e4, h_k=2500.0, h_sat=50000.0, transduction_gain_G=0.5 * _PLATED_GAIN),
    "plated+annealed": GmiWire(**_WIRE_BASE, mu_max=8e4, h_k=1100.0, h_sat=22000.0, transduction_gain_G=1.3 * _PLATED_GAIN),
}
WIRE_PRESETS["paper-wire"] = WIRE_PRESETS["plated"]

CHAIN_PRESETS = {
    "default-chain": dict(n_dipoles=40, pitch=1.25e-6, n_domains=4, moment=1.2e-12, tilt=float(np.deg2rad(40.0)), length_l=30e-3),
}

NOISE_PRESETS = {
    "paper-noise": NoiseParams(alpha=0.01, temperature_T=300.0, m_s_saturation=660e3, gamma_e=GYRO_E),
}

_KINDS = {"nv": NV_PRESETS, "wire": WIRE_PRESETS, "chain": CHAIN_PRESETS, "noise": NOISE_PRESETS}
_TYPES = {"nv": NvParams, "wire": GmiWire, "noise": NoiseParams}
DEFAULT_IDS = {"nv": "paper-nv", "wire": "paper-wire", "chain": "default-chain", "noise": "paper-noise"}


def calibrated_gain(wire: GmiWire, two_tau=OPERATING_TWO_TAU, v_ac=OPERATING_V_AC, window=OPERATING_WINDOW, fringes=OPERATING_FRINGES):
    """Gain G giving ``fringes`` echo fringes across ``window``.

    The synchronized echo phase is ``4 gamma_e b_ac two_tau`` and ``b_ac`` is
    proportional to ``G/|Z|``, so the fringe count is linear in G.
    """
    k = 4.0 * GYRO_E * two_tau * MU_0 * v_ac / (2.0 * np.pi * wire.standoff_r)
    lo, hi = window
    g = 1.0 / np.abs(impedance(wire, 1.0 / two_tau, np.array([lo, hi]) / MU_0))
    return float(2.0 * np.pi * fringes / (k * (g[1] - g[0])))


def get(kind: str, preset_id: str):
    if kind not in _KINDS:
        raise ConfigError(f"presets.{kind}", f"unknown preset kind {kind!r}")
    table = _KINDS[kind]
    if preset_id not in table:
        raise ConfigError(f"presets.{kind}", f"unknown {kind} preset {preset_id!r}; available: {', '.join(sorted(table))}")
    if kind == "chain":
        return DomainChain.alternating(**table[preset_id])
    return table[preset_id]


def override(obj, changes: dict, path: str):
    """Copy of a preset dataclass with selected fields replaced."""
    names = {f.name for f in fields(obj)}
    for key in changes:
        if key not in names:
            raise ConfigError(f"{path}.{key}", "unknown parameter")
    try:
        return replace(obj, **changes)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def catalog() -> dict:
    """Plain-data view of every preset, keyed by kind then id."""
    out = {}
    for kind, table in _KINDS.items():
        out[kind] = {}
        for pid in sorted(table):
            v = table[pid]
            out[kind][pid] = dict(v) if isinstance(v, dict) else asdict(v)
    return out


def catalog_json() -> str:
    return json.dumps(catalog(), sort_keys=True, indent=1) + "\n"


def catalog_from_json(text: str) -> dict:
    """Rebuild preset objects from ``catalog_json`` output."""
    data = json.loads(text)
    out = {}
    for kind, table in data.items():
        cls = _TYPES.get(kind)
        out[kind] = {pid: (cls(**vals) if cls else dict(vals)) for pid, vals in table.items()}
    return out


def format_catalog() -> str:
    lines = []
    for pid, nv in sorted(NV_PRESETS.items()):
        lines.append(f"nv     {pid:16s} T2*={nv.t2_star * 1e6:g} us  T2={nv.t2 * 1e6:g} us  p={nv.stretch_p:g}  A={nv.hyperfine_A / 1e6:g} MHz  Rabi={nv.rabi_freq / 1e6:g} MHz  c={nv.contrast_c:g}  photons={nv.photons_bright:g}")
    for pid, w in sorted(WIRE_PRESETS.items()):
        lines.append(
            f"wire   {pid:16s} diameter={2 * w.radius_a * 1e6:g} um  length={w.length_l * 1e3:g} mm  r_dc={w.r_dc:g} ohm  "
            f"mu_max={w.mu_max:g}  h_k={w.h_k:g} A/m  G={w.transduction_gain_G:g}"
        )
    for pid, c in sorted(CHAIN_PRESETS.items()):
        lines.append(f"chain  {pid:16s} {c['n_dipoles']} dipoles, {c['n_domains']} domains, m={c['moment']:g} A m^2")
    for pid, n in sorted(NOISE_PRESETS.items()):
        lines.append(f"noise  {pid:16s} alpha={n.alpha:g}  T={n.temperature_T:g} K  Ms={n.m_s_saturation:g} A/m")
    return "\n".join(lines) + "\n"
