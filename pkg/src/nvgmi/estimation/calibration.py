"""Coil calibration from ODMR spectra recorded against coil current."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..constants import GYRO_E
from ..errors import CalibrationFailure, FitFailure, InvalidArgument
from .fitting import fit_lorentzian_multi

MIN_WINDOW = 5
RESIDUAL_FRACTION = 0.01


def field_from_centers(centers, gyro_e=GYRO_E):
    """|B_par| from four sorted transition frequencies."""
    c = np.sort(np.asarray(centers, dtype=float))
    if c.shape != (4,):
        raise InvalidArgument("need four transition frequencies")
    return (c[2:].mean() - c[:2].mean()) / (2.0 * gyro_e)


def _window_fit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = A @ coef - y
    return float(np.sqrt(np.mean(r * r))), float(np.max(np.abs(r))), coef


def linear_window(currents, fields, min_points=MIN_WINDOW, fraction=RESIDUAL_FRACTION):
    """Longest contiguous window in which every straight-line residual is
    below ``fraction`` of the window's field span (so the RMS is too).
    Ties go to the earliest window.

    Bounding the worst residual rather than the RMS keeps a single
    saturated end point from hiding in a long window.

    Returns ``(start, stop)`` slice indices.
    """
    x = np.asarray(currents, dtype=float)
    y = np.asarray(fields, dtype=float)
    n = len(x)
    for length in range(n, min_points - 1, -1):
        for i in range(0, n - length + 1):
            xs, ys = x[i : i + length], y[i : i + length]
            span = np.ptp(ys)
            if span <= 0:
                continue
            _, worst, _ = _window_fit(xs, ys)
            if worst < fraction * span:
                return i, i + length
    raise CalibrationFailure(f"no window of >= {min_points} points with residuals below {fraction:.0%} of its span")


@dataclass(frozen=True)
class CoilCalibration:
    slope: float
    intercept: float
    window: tuple
    currents: np.ndarray
    fields: np.ndarray
    residual_rms: float

    @property
    def window_currents(self):
        i, j = self.window
        return self.currents[i], self.currents[j - 1]

    def to_document(self) -> dict:
        lo, hi = self.window_currents
        return {
            "slope_T_per_A": float(self.slope),
            "intercept_T": float(self.intercept),
            "window_index": [int(self.window[0]), int(self.window[1])],
            "window_current_A": [float(lo), float(hi)],
            "residual_rms_T": float(self.residual_rms),
            "fields_T": [float(b) for b in self.fields],
        }


def calibrate_from_fields(currents, fields) -> CoilCalibration:
    x = np.asarray(currents, dtype=float)
    y = np.asarray(fields, dtype=float)
    if len(x) != len(y) or len(x) < MIN_WINDOW:
        raise InvalidArgument("need matching current and field arrays of at least 5 points")
    if np.any(np.diff(x) <= 0):
        raise InvalidArgument("currents must be strictly increasing")
    i, j = linear_window(x, y)
    rms, _, (slope, intercept) = _window_fit(x[i:j], y[i:j])
    return CoilCalibration(float(slope), float(intercept), (i, j), x, y, rms)


def calibrate_coil(currents, odmr_traces, gyro_e=GYRO_E) -> CoilCalibration:
    """Calibrate field per unit coil current from one ODMR trace per current."""
    if len(currents) != len(odmr_traces):
        raise InvalidArgument("one ODMR trace per current required")
    fields = []
    for k, tr in enumerate(odmr_traces):
        try:
            fit = fit_lorentzian_multi(tr, 4)
        except FitFailure as exc:
            raise CalibrationFailure(f"ODMR fit failed at current index {k}: {exc}") from exc
        fields.append(field_from_centers([fit[f"center_{i}"] for i in range(4)], gyro_e))
    return calibrate_from_fields(currents, fields)
