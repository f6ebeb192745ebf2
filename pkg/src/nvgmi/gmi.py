"""Soft-ferromagnetic microwire: permeability, skin effect, impedance and
the fields the wire produces at the NV.

All quantities are SI.  Functions broadcast over array-valued field and
frequency arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import jve

from .constants import BOLTZMANN, GYRO_E, MU_0
from .errors import InvalidArgument, OutOfRegime, SingularityError

# |k a| beyond which the Bessel ratio is no longer trusted
MAX_KA = 1e4


@dataclass(frozen=True)
class GmiWire:
    """Wire geometry and a memoryless circumferential permeability model.

    ``peak_offset`` > 0 switches to a symmetric double-peak permeability
    centered at +/- ``peak_offset`` (A/m), used for the high-frequency
    two-peak behavior; the default single peak sits at zero field.
    """

    radius_a: float = 12.5e-6
    length_l: float = 30e-3
    resistivity_rho: float = 1.3e-6
    r_dc: float = 10.2
    mu_max: float = 1e4
    h_k: float = 600.0
    h_sat: float = 12000.0
    transduction_gain_G: float = 1.0
    standoff_r: float = 20e-6
    peak_offset: float = 0.0

    def __post_init__(self):
        if self.radius_a <= 0 or self.length_l <= 0 or self.r_dc <= 0:
            raise InvalidArgument("radius_a, length_l and r_dc must be positive")
        if self.resistivity_rho <= 0:
            raise InvalidArgument("resistivity_rho must be positive")
        if self.mu_max < 1 or self.h_k <= 0 or self.h_sat <= 0:
            raise InvalidArgument("need mu_max >= 1, h_k > 0, h_sat > 0")
        if self.standoff_r <= self.radius_a:
            raise InvalidArgument("standoff_r must exceed radius_a")
        if self.transduction_gain_G <= 0 or self.peak_offset < 0:
            raise InvalidArgument("transduction_gain_G must be positive, peak_offset non-negative")


@dataclass(frozen=True)
class NoiseParams:
    alpha: float = 0.01
    temperature_T: float = 300.0
    m_s_saturation: float = 660e3
    gamma_e: float = GYRO_E

    def __post_init__(self):
        if min(self.alpha, self.temperature_T, self.m_s_saturation, self.gamma_e) <= 0:
            raise InvalidArgument("noise parameters must be strictly positive")


def _check_finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument(f"{name} must be finite")
    return x


def permeability(wire: GmiWire, h_dc):
    """Relative permeability ``1 + (mu_max - 1)/(1 + (h/h_k)**2)``."""
    h = _check_finite(h_dc, "h_dc")
    if wire.peak_offset == 0.0:
        return 1.0 + (wire.mu_max - 1.0) / (1.0 + (h / wire.h_k) ** 2)
    lo = 1.0 / (1.0 + ((h - wire.peak_offset) / wire.h_k) ** 2)
    hi = 1.0 / (1.0 + ((h + wire.peak_offset) / wire.h_k) ** 2)
    return 1.0 + (wire.mu_max - 1.0) * 0.5 * (lo + hi)


def skin_depth(f_ac, mu_r, rho):
    """Classical skin depth ``sqrt(2 rho / (omega mu_r mu_0))`` in m."""
    f_ac = _check_finite(f_ac, "f_ac")
    mu_r = _check_finite(mu_r, "mu_r")
    if np.any(f_ac <= 0):
        raise InvalidArgument("f_ac must be positive")
    if np.any(mu_r < 1):
        raise InvalidArgument("mu_r must be >= 1")
    if rho <= 0:
        raise InvalidArgument("rho must be positive")
    return np.sqrt(2.0 * rho / (2.0 * np.pi * f_ac * mu_r * MU_0))


def impedance(wire: GmiWire, f_ac, h_dc):
    """Complex impedance of a round wire with skin effect.

    ``Z = r_dc * (k a / 2) * J0(k a) / J1(k a)`` with ``k = (1 - i)/delta``.
    Exponentially scaled Bessel functions are used so that the ratio stays
    finite deep in the skin-limited regime.

    Raises
    ------
    OutOfRegime
        if ``|k a|`` exceeds ``MAX_KA``.
    """
    delta = skin_depth(f_ac, permeability(wire, h_dc), wire.resistivity_rho)
    ka = (1.0 - 1.0j) * wire.radius_a / delta
    if np.any(np.abs(ka) > MAX_KA):
        raise OutOfRegime(f"|k a| = {np.max(np.abs(ka)):.3g} exceeds {MAX_KA:g}; reduce f_ac or mu_max")
    return wire.r_dc * (ka / 2.0) * jve(0, ka) / jve(1, ka)


def gmi_ratio(wire: GmiWire, f_ac, h_dc):
    """GMI ratio in percent, normalized to the impedance at ``wire.h_sat``."""
    z = np.abs(impedance(wire, f_ac, h_dc))
    z_sat = np.abs(impedance(wire, f_ac, wire.h_sat))
    return 100.0 * (z - z_sat) / z_sat


def ac_field_at_nv(wire: GmiWire, v_ac, f_ac, b_dc_external):
    """Amplitude (T) of the RF near-field at the NV.

    The drive current ``v_ac/|Z|`` produces the azimuthal field
    ``mu_0 i / (2 pi r)`` at the standoff, scaled by the transduction gain.
    """
    v = _check_finite(v_ac, "v_ac")
    if np.any(v < 0):
        raise InvalidArgument("v_ac must be non-negative")
    h = _check_finite(b_dc_external, "b_dc_external") / MU_0
    i_ac = v / np.abs(impedance(wire, f_ac, h))
    return wire.transduction_gain_G * MU_0 * i_ac / (2.0 * np.pi * wire.standoff_r)


def steepest_bias(wire: GmiWire, f_ac: float, b_max: float | None = None, n: int = 20001):
    """Field of maximum ``d(1/|Z|)/dB`` on ``[0, b_max]``.

    Returns ``(b_dc, slope)`` with slope in 1/(Ohm T).  ``b_max`` defaults
    to ``mu_0 * h_sat``.
    """
    b_max = MU_0 * wire.h_sat if b_max is None else b_max
    b = np.linspace(0.0, b_max, n)
    g = 1.0 / np.abs(impedance(wire, f_ac, b / MU_0))
    dg = np.gradient(g, b)
    i = int(np.argmax(dg))
    return float(b[i]), float(dg[i])


def intrinsic_noise(wire: GmiWire, noise: NoiseParams):
    """Thermal magnetization noise floor of the wire, T/sqrt(Hz)."""
    a, l = wire.radius_a, wire.length_l
    return np.sqrt(
        2.0 * noise.alpha * BOLTZMANN * noise.temperature_T
        / (noise.gamma_e * noise.m_s_saturation * np.pi**2 * a**2 * l)
    )


@dataclass(frozen=True)
class DomainChain:
    """Point dipoles along the wire axis (x), moments in A m^2."""

    positions: np.ndarray
    moments: np.ndarray
    length_l: float = 30e-3
    # transverse location of the wire axis, (y, z)
    axis_yz: tuple = (0.0, 0.0)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1)
        mom = np.array(self.moments, dtype=float).reshape(-1, 3)
        if len(pos) != len(mom):
            raise InvalidArgument("one moment per dipole position required")
        if np.any(pos < 0) or np.any(pos > self.length_l):
            raise InvalidArgument("dipole positions must lie within [0, length_l]")
        pos.flags.writeable = False
        mom.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "moments", mom)

    @property
    def points(self) -> np.ndarray:
        y, z = self.axis_yz
        return np.column_stack([self.positions, np.full(len(self.positions), y), np.full(len(self.positions), z)])

    def flipped(self) -> "DomainChain":
        return DomainChain(self.positions, -self.moments, self.length_l, self.axis_yz)

    @classmethod
    def alternating(cls, n_dipoles=40, pitch=1.25e-6, n_domains=4, moment=1.2e-12, tilt=np.deg2rad(40.0), length_l=30e-3):
        """Domains of equal size whose transverse moment component alternates.

        Each moment is ``moment * (0, +/-sin(tilt), cos(tilt))``.
        """
        if n_dipoles % n_domains:
            raise InvalidArgument("n_dipoles must be a multiple of n_domains")
        pos = pitch * (np.arange(n_dipoles) + 0.5)
        sign = np.where((np.arange(n_dipoles) // (n_dipoles // n_domains)) % 2 == 0, 1.0, -1.0)
        mom = moment * np.column_stack([np.zeros(n_dipoles), sign * np.sin(tilt), np.full(n_dipoles, np.cos(tilt))])
        return cls(pos, mom, length_l)


def stray_field(chain: DomainChain, position):
    """Superposed point-dipole field (T) at one point (3,) or many (m, 3)."""
    r = np.asarray(position, dtype=float)
    single = r.ndim == 1
    r = np.atleast_2d(r)
    if r.shape[-1] != 3 or not np.all(np.isfinite(r)):
        raise InvalidArgument("positions must be finite 3-vectors")
    d = r[:, None, :] - chain.points[None, :, :]
    dist = np.linalg.norm(d, axis=-1)
    if np.any(dist < 1e-9):
        raise SingularityError("evaluation point within 1 nm of a dipole")
    rhat = d / dist[..., None]
    m = chain.moments[None, :, :]
    mdotr = np.sum(m * rhat, axis=-1, keepdims=True)
    b = MU_0 / (4.0 * np.pi) * (3.0 * rhat * mdotr - m) / dist[..., None] ** 3
    b = b.sum(axis=1)
    return b[0] if single else b
