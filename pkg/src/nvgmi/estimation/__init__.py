"""Fitting, spectra, sensitivity figures and coil calibration."""

from .calibration import CoilCalibration, calibrate_coil, calibrate_from_fields, linear_window
from .fitting import FitResult, fit_decay, fit_hahn_pair, fit_lorentzian_multi, fit_sinusoid, sinusoid_amplitude_scan
from .sensitivity import (
    SensitivityReport,
    contrast,
    delta_b_per_fringe_half,
    magnetometer_sensitivity,
    shot_noise_dc_sensitivity,
)
from .spectra import NoiseSpectrum, Spectrum, fft_spectrum, noise_spectral_density, peak_frequencies
