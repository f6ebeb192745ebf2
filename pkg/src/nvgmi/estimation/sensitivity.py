"""Sensitivity figures: linewidth limit, fringe field step, contrast and
the slope-based DC sensitivity of an echo magnetometry sweep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..constants import BOHR_MAGNETON, G_FACTOR, GYRO_E, PLANCK
from ..errors import InsufficientData, InvalidArgument, UndefinedContrast
from .fitting import FitResult, as_xy, fit_sinusoid

SIGMA_MODES = ("residual", "poisson")


def shot_noise_dc_sensitivity(fwhm):
    """Field equivalent of a resonance linewidth, ``h fwhm / (g mu_B)``."""
    fwhm = np.asarray(fwhm, dtype=float)
    if np.any(fwhm < 0):
        raise InvalidArgument("fwhm must be non-negative")
    return PLANCK * fwhm / (G_FACTOR * BOHR_MAGNETON)


def delta_b_per_fringe_half(two_tau, gyro_e=GYRO_E):
    """Field step ``1/(2 tau gamma_e)`` corresponding to a pi echo phase."""
    two_tau = np.asarray(two_tau, dtype=float)
    if np.any(two_tau <= 0):
        raise InvalidArgument("two_tau must be positive")
    return 1.0 / (two_tau * gyro_e)


def contrast(m1, m2):
    """``(m1 - m2)/(m1 + m2)`` for two non-negative spreads."""
    if m1 < 0 or m2 < 0:
        raise InvalidArgument("spreads must be non-negative")
    if m1 + m2 == 0:
        raise UndefinedContrast("contrast undefined for m1 = m2 = 0")
    return (m1 - m2) / (m1 + m2)


@dataclass(frozen=True)
class SensitivityReport:
    sigma_s: float
    slope: float
    b_min: float
    measurement_time_t: float
    eta_dc: float
    fringe_count: float
    sigma_mode: str
    fit: FitResult

    def to_document(self) -> dict:
        return {
            "sigma_s": self.sigma_s,
            "slope": self.slope,
            "b_min": self.b_min,
            "measurement_time_t": self.measurement_time_t,
            "eta_dc": self.eta_dc,
            "fringe_count": self.fringe_count,
            "sigma_mode": self.sigma_mode,
            "fit": self.fit.to_document(),
        }


def magnetometer_sensitivity(trace, two_tau, n_shots, sigma_s=None, sigma_mode="residual", y=None) -> SensitivityReport:
    """DC sensitivity from the maximum slope of a fringe sweep.

    The sweep is fitted with ``a + c cos(2 pi B / P + phi)``; the maximum
    slope is ``2 pi |c| / P``.  ``sigma_s`` is the injected per-point signal
    spread or, when None, the fit residual spread (``'residual'``) or the
    Poisson spread ``sqrt(S/n_shots)`` (``'poisson'``).  The measurement time
    is ``n_shots * two_tau``.
    """
    if two_tau <= 0:
        raise InvalidArgument("two_tau must be positive")
    if int(n_shots) != n_shots or n_shots < 1:
        raise InvalidArgument("n_shots must be a positive integer")
    x, s = as_xy(trace, y)
    fit = fit_sinusoid(x, s)
    period = fit["period"]
    fringes = float(np.ptp(x) / period)
    if fringes < 1.0:
        raise InsufficientData(f"sweep spans {fringes:.2f} fringes, at least 1 required")
    amplitude = abs(fit["amplitude"])
    slope = 2.0 * np.pi * amplitude / period
    if sigma_s is None:
        if sigma_mode == "residual":
            sigma_s = float(np.sqrt(fit.ssr / fit.dof))
        elif sigma_mode == "poisson":
            sigma_s = float(np.sqrt(np.mean(s) / n_shots))
        else:
            raise InvalidArgument(f"sigma_mode must be one of {SIGMA_MODES}")
    else:
        sigma_mode = "injected"
    b_min = sigma_s / slope
    t = n_shots * two_tau
    return SensitivityReport(float(sigma_s), float(slope), float(b_min), float(t), float(b_min * np.sqrt(t)), fringes, sigma_mode, fit)
