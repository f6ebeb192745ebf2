"""FFT spectra and magnetic noise spectral density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from ..errors import InvalidArgument
from .fitting import as_xy

DEFAULT_BAND = (10.0, 450.0)


@dataclass(frozen=True)
class Spectrum:
    """One-sided spectrum of a mean-removed, windowed record.

    ``amplitude`` is scaled so a sinusoid centered on a bin reads its own
    amplitude; ``power`` is scaled so that ``power.sum()`` equals the
    window-normalized energy ``N * sum((y w)**2) / sum(w**2)``.
    """

    freqs: np.ndarray
    amplitude: np.ndarray
    power: np.ndarray
    window: str
    df: float


def _uniform_step(t):
    d = np.diff(t)
    if len(d) == 0 or np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-6, atol=0):
        raise InvalidArgument("samples must be uniformly spaced and increasing")
    return float((t[-1] - t[0]) / (len(t) - 1))


def _one_sided_factor(n):
    fac = np.full(n // 2 + 1, 2.0)
    fac[0] = 1.0
    if n % 2 == 0:
        fac[-1] = 1.0
    return fac


def fft_spectrum(trace, window="boxcar", y=None) -> Spectrum:
    t, y = as_xy(trace, y)
    dt = _uniform_step(t)
    n = len(y)
    w = get_window(window, n, fftbins=False) if window != "boxcar" else np.ones(n)
    X = np.fft.rfft((y - y.mean()) * w)
    fac = _one_sided_factor(n)
    amplitude = fac * np.abs(X) / w.sum()
    power = fac * np.abs(X) ** 2 / np.sum(w**2)
    return Spectrum(np.fft.rfftfreq(n, dt), amplitude, power, window, 1.0 / (n * dt))


def peak_frequencies(spectrum: Spectrum, k=2, f_min=0.0):
    """Frequencies of the ``k`` largest local maxima above ``f_min``, ascending."""
    a = spectrum.amplitude
    f = spectrum.freqs
    idx = [i for i in range(1, len(a) - 1) if a[i] >= a[i - 1] and a[i] > a[i + 1] and f[i] > f_min]
    idx = sorted(idx, key=lambda i: a[i], reverse=True)[:k]
    return np.sort(f[idx])


@dataclass(frozen=True)
class NoiseSpectrum:
    freqs: np.ndarray
    density: np.ndarray
    mean_floor: float
    duration: float
    sampling_rate: float
    band: tuple

    def to_document(self) -> dict:
        return {
            "mean_floor": float(self.mean_floor),
            "duration": float(self.duration),
            "sampling_rate": float(self.sampling_rate),
            "band": [float(b) for b in self.band],
            "n_bins": int(len(self.freqs)),
        }


def noise_spectral_density(counts, sampling_rate, slope, band=DEFAULT_BAND) -> NoiseSpectrum:
    """Magnetic amplitude spectral density of a fluorescence count record.

    The one-sided count ASD ``sqrt(2 |X_k|^2 / (fs N))`` is divided by the
    response slope (counts per bin per tesla).  Bins cover (0, fs/2].
    ``mean_floor`` is the power average ``sqrt(mean(density**2))`` over
    ``band``: averaging amplitudes instead would bias a white floor low by
    the Rayleigh factor sqrt(pi)/2.
    """
    c = np.asarray(counts, dtype=float).reshape(-1)
    if not np.all(np.isfinite(c)):
        raise InvalidArgument("counts must be finite")
    if not slope > 0:
        raise InvalidArgument("slope must be positive")
    if sampling_rate <= 0:
        raise InvalidArgument("sampling_rate must be positive")
    n = len(c)
    duration = n / sampling_rate
    if duration < 1.0 - 1e-12:
        raise InvalidArgument("count record must span at least 1 s")
    X = np.fft.rfft(c - c.mean())[1:]
    fac = _one_sided_factor(n)[1:]
    asd = np.sqrt(fac * np.abs(X) ** 2 / (sampling_rate * n))
    freqs = np.fft.rfftfreq(n, 1.0 / sampling_rate)[1:]
    density = asd / slope
    lo, hi = band
    sel = (freqs >= lo) & (freqs <= hi)
    if not np.any(sel):
        raise InvalidArgument("band contains no frequency bins")
    floor = float(np.sqrt(np.mean(density[sel] ** 2)))
    return NoiseSpectrum(freqs, density, floor, duration, float(sampling_rate), (float(lo), float(hi)))
