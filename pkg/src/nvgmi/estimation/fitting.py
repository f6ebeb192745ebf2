"""Nonlinear least-squares fitters for the trace models.

Every fit runs on internally normalized abscissa and ordinate with
Levenberg-Marquardt (``scipy.optimize.least_squares``), analytic Jacobians
and a cap of 200 function evaluations.  Parameters and their 1-sigma
uncertainties (from ``inv(J^T J) * s^2``) are reported in the caller's units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from ..errors import FitFailure, InvalidArgument

MAX_EVALUATIONS = 200
XTOL = 1e-8


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    errors: dict
    residual_rms: float
    converged: bool
    iterations: int
    ssr: float = np.nan
    dof: int = 0
    extra: dict = field(default_factory=dict)
    _predict: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __getitem__(self, name):
        return self.params[name]

    def predict(self, x):
        if self._predict is None:
            raise InvalidArgument(f"model {self.model!r} has no evaluator")
        return self._predict(np.asarray(x, dtype=float))

    def to_document(self) -> dict:
        doc = {
            "model": self.model,
            "params": {k: float(v) for k, v in self.params.items()},
            "errors": {k: float(v) for k, v in self.errors.items()},
            "residual_rms": float(self.residual_rms),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }
        for k, v in self.extra.items():
            if isinstance(v, FitResult):
                doc[k] = v.to_document()
            elif isinstance(v, (int, float, str, bool)):
                doc[k] = v
        return doc


def as_xy(trace, y=None):
    """Accept a Trace, an (x, y) pair or two arrays."""
    if y is not None:
        x = trace
    elif hasattr(trace, "mean_signal"):
        x, y = trace.values, trace.mean_signal
    else:
        x, y = trace
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(x) != len(y):
        raise InvalidArgument("x and y differ in length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgument("non-finite data")
    return x, y


def _solve(res, jac, p0, n_points):
    """LM solve; returns (least_squares result, covariance, ssr, dof)."""
    sol = least_squares(res, np.asarray(p0, dtype=float), jac=jac, method="lm", xtol=XTOL, ftol=1e-12, gtol=1e-12, max_nfev=MAX_EVALUATIONS)
    ssr = float(np.sum(sol.fun**2))
    dof = max(n_points - len(sol.x), 1)
    jtj = sol.jac.T @ sol.jac
    try:
        cov = np.linalg.inv(jtj) * ssr / dof
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * ssr / dof
    return sol, cov, ssr, dof


def _linear_errors(cov, scales):
    d = np.abs(np.diag(cov)) * np.asarray(scales, dtype=float) ** 2
    return np.sqrt(d)


def _finish(model, names, values, errors, sol, ssr, dof, n, y_scale, predict, extra=None):
    ok = bool(sol.status > 0 and np.all(np.isfinite(values)) and np.isfinite(ssr))
    result = FitResult(
        model,
        dict(zip(names, map(float, values))),
        dict(zip(names, map(float, errors))),
        float(np.sqrt(ssr / n)) * y_scale,
        ok,
        int(sol.nfev),
        ssr * y_scale**2,
        dof,
        extra or {},
        predict,
    )
    if not ok:
        raise FitFailure(f"{model} fit did not converge within {MAX_EVALUATIONS} evaluations", best=result)
    return result


def _normalize_y(y):
    y0 = float(np.mean(y))
    sy = float(np.ptp(y)) or 1.0
    return y0, sy, (y - y0) / sy


# Lorentzian dips ----------------------------------------------------------

def lorentzian_dips(x, baseline, centers, fwhms, depths):
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, baseline)
    for c, w, a in zip(centers, fwhms, depths):
        hw2 = w * w / 4.0
        out -= a * hw2 / ((x - c) ** 2 + hw2)
    return out


def _dip_guesses(u, v, n_dips):
    prom = np.ptp(v) * 0.05
    peaks, props = find_peaks(-v, prominence=prom)
    if len(peaks) < n_dips:
        raise FitFailure(f"found {len(peaks)} dips, expected {n_dips}")
    order = np.argsort(props["prominences"])[::-1][:n_dips]
    peaks = np.sort(peaks[order])
    widths = peak_widths(-v, peaks, rel_height=0.5)[0] * np.mean(np.diff(u))
    depths = v.max() - v[peaks]
    return u[peaks], np.maximum(widths, 2 * np.mean(np.diff(u))), depths


def fit_lorentzian_multi(trace, n_dips, y=None) -> FitResult:
    """Sum of ``n_dips`` Lorentzian dips on a constant baseline.

    Centers are returned sorted ascending as ``center_k`` together with
    ``fwhm_k`` and ``depth_k``.
    """
    if n_dips not in (2, 4):
        raise InvalidArgument("n_dips must be 2 or 4")
    x, y = as_xy(trace, y)
    if len(x) < 4 * n_dips:
        raise InvalidArgument("too few points for the requested number of dips")
    x0 = float(np.mean(x))
    sx = float(np.ptp(x) / 2.0) or 1.0
    u = (x - x0) / sx
    y0, sy, v = _normalize_y(y)
    c0, w0, a0 = _dip_guesses(u, v, n_dips)
    k = n_dips

    def unpack(p):
        return p[0], p[1 : 1 + k], p[1 + k : 1 + 2 * k], p[1 + 2 * k :]

    def res(p):
        b, c, w, a = unpack(p)
        return lorentzian_dips(u, b, c, w, a) - v

    def jac(p):
        b, c, w, a = unpack(p)
        J = np.empty((len(u), 1 + 3 * k))
        J[:, 0] = 1.0
        for i in range(k):
            d = u - c[i]
            hw2 = w[i] ** 2 / 4.0
            den = d * d + hw2
            L = hw2 / den
            J[:, 1 + i] = -a[i] * 2.0 * d * hw2 / den**2
            J[:, 1 + k + i] = -a[i] * (w[i] / 2.0) * d * d / den**2
            J[:, 1 + 2 * k + i] = -L
        return J

    p0 = np.concatenate([[v.max()], c0, w0, a0])
    sol, cov, ssr, dof = _solve(res, jac, p0, len(u))
    b, c, w, a = unpack(sol.x)
    err = np.sqrt(np.abs(np.diag(cov)))
    order = np.argsort(c)
    centers = x0 + sx * c[order]
    fwhms = sx * np.abs(w[order])
    depths = sy * a[order]
    baseline = y0 + sy * b
    names = ["baseline"] + [f"center_{i}" for i in range(k)] + [f"fwhm_{i}" for i in range(k)] + [f"depth_{i}" for i in range(k)]
    values = np.concatenate([[baseline], centers, fwhms, depths])
    errors = np.concatenate([[sy * err[0]], sx * err[1 : 1 + k][order], sx * err[1 + k : 1 + 2 * k][order], sy * err[1 + 2 * k :][order]])
    predict = lambda xx: lorentzian_dips(xx, baseline, centers, fwhms, depths)
    return _finish(f"lorentzian_{k}", names, values, errors, sol, ssr, dof, len(u), sy, predict)


# decays -----------------------------------------------------------------

def _envelope_and_derivs(t, T, p):
    s = np.abs(t / T)
    sp = s**p
    E = np.exp(-sp)
    dT = E * p * sp / T
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(s > 0, np.log(np.where(s > 0, s, 1.0)), 0.0)
    dp = -E * sp * logs
    return E, dT, dp


def _fft_frequencies(u, v, k):
    n = len(u)
    spec = np.abs(np.fft.rfft((v - v.mean()) * np.hanning(n)))
    freqs = np.fft.rfftfreq(n, d=float(np.mean(np.diff(u))))
    peaks, props = find_peaks(spec, prominence=0.0)
    if len(peaks) < k:
        raise FitFailure("not enough spectral peaks for the oscillatory model")
    top = peaks[np.argsort(spec[peaks])[::-1][:k]]
    return np.sort(freqs[top])


def fit_decay(trace, kind="exp", p=None, oscillations=0, y=None) -> FitResult:
    """Decay fit ``o + A*exp(-(t/T)**p)``.

    ``kind='exp'`` fixes ``p = 1``; ``kind='stretched'`` uses the given
    ``p`` or fits it when ``p`` is None.  With ``oscillations = k > 0`` the
    envelope multiplies ``sum_k a_k cos(2 pi f_k t) + b_k sin(2 pi f_k t)``,
    which is how oscillating (Ramsey) data are fitted; frequency guesses
    come from the largest FFT peaks.

    Returns parameters ``offset``, ``time_constant``, ``exponent`` plus
    ``amplitude`` or the per-component ``freq_k``, ``cos_k``, ``sin_k``.
    """
    if kind not in ("exp", "stretched"):
        raise InvalidArgument(f"unknown decay kind {kind!r}")
    p_fixed = 1.0 if kind == "exp" else p
    if p_fixed is not None and p_fixed <= 0:
        raise InvalidArgument("exponent must be positive")
    t, y = as_xy(trace, y)
    if np.any(t < 0):
        raise InvalidArgument("decay abscissa must be non-negative")
    st = float(t.max()) or 1.0
    u = t / st
    y0, sy, v = _normalize_y(y)
    k = int(oscillations)
    free_p = p_fixed is None

    # layout: [o, T, (p), then A  or  (f, a, b) * k]
    def unpack(q):
        o, T = q[0], q[1]
        i = 2
        pp = q[i] if free_p else p_fixed
        i += free_p
        return o, T, pp, q[i:]

    def shape(rest, E):
        if k == 0:
            return rest[0] * E, None
        f, a, b = rest[0::3], rest[1::3], rest[2::3]
        ph = 2 * np.pi * np.outer(u, f)
        osc = np.cos(ph) @ a + np.sin(ph) @ b
        return E * osc, (f, a, b, ph, osc)

    def res(q):
        o, T, pp, rest = unpack(q)
        E, _, _ = _envelope_and_derivs(u, T, pp)
        m, _ = shape(rest, E)
        return o + m - v

    def jac(q):
        o, T, pp, rest = unpack(q)
        E, dT, dp = _envelope_and_derivs(u, T, pp)
        cols = [np.ones_like(u)]
        if k == 0:
            A = rest[0]
            cols += [A * dT] + ([A * dp] if free_p else []) + [E]
        else:
            _, (f, a, b, ph, osc) = shape(rest, E)
            cols += [dT * osc] + ([dp * osc] if free_p else [])
            c, s = np.cos(ph), np.sin(ph)
            for j in range(k):
                cols += [E * 2 * np.pi * u * (-a[j] * s[:, j] + b[j] * c[:, j]), E * c[:, j], E * s[:, j]]
        return np.column_stack(cols)

    p_start = 2.0 if free_p else p_fixed
    if k == 0:
        o0 = float(np.mean(v[-max(3, len(v) // 10):]))
        A0 = float(v[0] - o0)
        target = o0 + A0 / np.e
        below = np.nonzero((v - target) * np.sign(A0) <= 0)[0]
        T_guesses = [u[below[0]] if len(below) else 0.5]
        tail = []
    else:
        f0 = _fft_frequencies(u, v, k)
        T_guesses = [0.1, 0.25, 0.5, 1.0]
        o0 = float(np.mean(v))
        tail = []
        for f in f0:
            tail += [f, 0.0, 0.0]
    best = None
    failure = None
    for T0 in T_guesses:
        q0 = [o0, max(T0, 1e-3)] + ([p_start] if free_p else [])
        if k == 0:
            q0 += [A0]
        else:
            # linear amplitudes for the guessed envelope and frequencies
            E0 = np.exp(-((u / T0) ** p_start))
            ph = 2 * np.pi * np.outer(u, tail[0::3])
            basis = np.column_stack([np.ones_like(u)] + [E0 * np.cos(ph[:, j]) for j in range(k)] + [E0 * np.sin(ph[:, j]) for j in range(k)])
            coef = np.linalg.lstsq(basis, v, rcond=None)[0]
            q0[0] = coef[0]
            for j in range(k):
                tail[3 * j + 1] = coef[1 + j]
                tail[3 * j + 2] = coef[1 + k + j]
            q0 += tail
        try:
            sol, cov, ssr, dof = _solve(res, jac, q0, len(u))
        except (ValueError, np.linalg.LinAlgError) as exc:
            failure = exc
            continue
        if best is None or (sol.status > 0 and (best[0].status <= 0 or ssr < best[2])):
            best = (sol, cov, ssr, dof)
    if best is None:
        raise FitFailure(f"decay fit failed: {failure}")
    sol, cov, ssr, dof = best
    err = np.sqrt(np.abs(np.diag(cov)))
    o, T, pp, rest = unpack(sol.x)
    names = ["offset", "time_constant", "exponent"]
    values = [y0 + sy * o, st * abs(T), pp]
    errors = [sy * err[0], st * err[1], err[2] if free_p else 0.0]
    off = 2 + free_p
    if k == 0:
        names.append("amplitude")
        values.append(sy * rest[0])
        errors.append(sy * err[off])
    else:
        for j in range(k):
            names += [f"freq_{j}", f"cos_{j}", f"sin_{j}"]
            values += [rest[3 * j] / st, sy * rest[3 * j + 1], sy * rest[3 * j + 2]]
            errors += [err[off + 3 * j] / st, sy * err[off + 3 * j + 1], sy * err[off + 3 * j + 2]]
    vals = dict(zip(names, values))

    def predict(tt):
        E = np.exp(-((np.abs(tt) / vals["time_constant"]) ** vals["exponent"]))
        if k == 0:
            return vals["offset"] + vals["amplitude"] * E
        osc = sum(
            vals[f"cos_{j}"] * np.cos(2 * np.pi * vals[f"freq_{j}"] * tt) + vals[f"sin_{j}"] * np.sin(2 * np.pi * vals[f"freq_{j}"] * tt)
            for j in range(k)
        )
        return vals["offset"] + E * osc

    model = "exp" if kind == "exp" else "stretched"
    return _finish(f"decay_{model}" + (f"_osc{k}" if k else ""), names, values, errors, sol, ssr, dof, len(u), sy, predict)


def fit_hahn_pair(trace_0, trace_180, p=2.0) -> FitResult:
    """Fit both readout-phase variants of a Hahn-echo tau sweep.

    The decay is fitted against the total free-evolution time 2 tau, and the
    reported ``time_constant`` is the mean of the two fits.
    """
    fits = []
    for tr in (trace_0, trace_180):
        x, y = as_xy(tr)
        fits.append(fit_decay((2.0 * x, y), kind="stretched", p=p))
    t2 = 0.5 * (fits[0]["time_constant"] + fits[1]["time_constant"])
    e = 0.5 * np.hypot(fits[0].errors["time_constant"], fits[1].errors["time_constant"])
    return FitResult(
        "hahn_pair",
        {"time_constant": t2, "exponent": float(p)},
        {"time_constant": float(e), "exponent": 0.0},
        float(np.hypot(fits[0].residual_rms, fits[1].residual_rms) / np.sqrt(2)),
        all(f.converged for f in fits),
        fits[0].iterations + fits[1].iterations,
        fits[0].ssr + fits[1].ssr,
        fits[0].dof + fits[1].dof,
        {"phase_0": fits[0], "phase_180": fits[1]},
    )


# sinusoid ---------------------------------------------------------------

def _max_cycles(u):
    # stay clear of the Nyquist limit, where the sine column vanishes
    return 0.45 * (len(u) - 1)


def _scan(u, v, nus):
    """Residual sum of squares of the linear model [1, cos, sin] per frequency."""
    ssr = np.empty(len(nus))
    for i, nu in enumerate(nus):
        A = np.column_stack([np.ones_like(u), np.cos(2 * np.pi * nu * u), np.sin(2 * np.pi * nu * u)])
        coef, *_ = np.linalg.lstsq(A, v, rcond=None)
        r = A @ coef - v
        ssr[i] = r @ r
    return ssr


def sinusoid_amplitude_scan(x, y, min_cycles=1.0):
    """Largest linear-LS sinusoid amplitude over frequencies of at least
    ``min_cycles`` cycles per sweep span.  Robust on featureless traces."""
    x, y = as_xy(x, y)
    x0, sx = float(x[0]), float(np.ptp(x)) or 1.0
    u = (x - x0) / sx
    nus = np.arange(min_cycles, _max_cycles(u), 0.05)
    best = 0.0
    for nu in nus:
        A = np.column_stack([np.ones_like(u), np.cos(2 * np.pi * nu * u), np.sin(2 * np.pi * nu * u)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        best = max(best, float(np.hypot(coef[1], coef[2])))
    return best


def fit_sinusoid(trace, y=None, n_starts=8) -> FitResult:
    """``S(x) = offset + amplitude*cos(2 pi x / period + phase)``.

    The fit is multimodal in the frequency, so LM is started from the
    ``n_starts`` best local minima of a linear least-squares frequency scan
    and the lowest-residual converged solution is kept.
    """
    x, y = as_xy(trace, y)
    if len(x) < 5:
        raise InvalidArgument("need at least 5 points")
    x0 = float(np.mean(x))
    sx = float(np.ptp(x)) or 1.0
    u = (x - x0) / sx
    y0, sy, v = _normalize_y(y)
    nus = np.arange(0.3, _max_cycles(u), 0.02)
    ssr_scan = _scan(u, v, nus)
    minima = [i for i in range(len(nus)) if (i == 0 or ssr_scan[i] <= ssr_scan[i - 1]) and (i == len(nus) - 1 or ssr_scan[i] <= ssr_scan[i + 1])]
    minima = sorted(minima, key=lambda i: ssr_scan[i])[:n_starts]

    def res(q):
        o, a, b, nu = q
        return o + a * np.cos(2 * np.pi * nu * u) + b * np.sin(2 * np.pi * nu * u) - v

    def jac(q):
        o, a, b, nu = q
        c, s = np.cos(2 * np.pi * nu * u), np.sin(2 * np.pi * nu * u)
        return np.column_stack([np.ones_like(u), c, s, 2 * np.pi * u * (-a * s + b * c)])

    best = None
    for i in minima:
        nu = nus[i]
        A = np.column_stack([np.ones_like(u), np.cos(2 * np.pi * nu * u), np.sin(2 * np.pi * nu * u)])
        coef, *_ = np.linalg.lstsq(A, v, rcond=None)
        sol, cov, ssr, dof = _solve(res, jac, [coef[0], coef[1], coef[2], nu], len(u))
        if sol.x[3] <= 0:
            continue
        if best is None or (sol.status > 0 and (best[0].status <= 0 or ssr < best[2])):
            best = (sol, cov, ssr, dof)
    if best is None:
        raise FitFailure("sinusoid fit found no positive frequency")
    sol, cov, ssr, dof = best
    o, a, b, nu = sol.x
    cu = float(np.hypot(a, b))
    psi = float(np.arctan2(b, a))
    period = sx / nu
    phase = float(np.angle(np.exp(1j * (-psi - 2 * np.pi * x0 / period))))
    # dphys/dq for (offset, amplitude, period, phase)
    T = np.zeros((4, 4))
    T[0, 0] = sy
    if cu > 0:
        T[1, 1], T[1, 2] = sy * a / cu, sy * b / cu
        T[3, 1], T[3, 2] = b / cu**2, -a / cu**2
    T[2, 3] = -sx / nu**2
    T[3, 3] = -2 * np.pi * x0 / sx
    pcov = T @ cov @ T.T
    names = ["offset", "amplitude", "period", "phase"]
    values = [y0 + sy * o, sy * cu, period, phase]
    errors = np.sqrt(np.abs(np.diag(pcov)))
    predict = lambda xx: values[0] + values[1] * np.cos(2 * np.pi * xx / period + phase)
    return _finish("sinusoid", names, values, errors, sol, ssr, dof, len(u), sy, predict, {"frequency": 1.0 / period})
