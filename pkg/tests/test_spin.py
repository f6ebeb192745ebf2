import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from nvgmi.errors import InvalidArgument, ProtocolError
from nvgmi.spin import (
    FieldAtNv,
    NvParams,
    SpinState,
    ac_field_integral,
    branch_frequencies,
    dephasing,
    evolve,
    expected_counts,
    odmr_signal,
    readout,
    transition_frequencies,
)
from nvgmi.timeline import FreeEvolve, LaserInit, MwPulse, Readout

NV = NvParams()


def run_segments(segs, field=None, decay=None, params=NV):
    field = field or FieldAtNv.along_axis(0.0)
    s = SpinState()
    for seg in segs:
        s = evolve(s, seg, field, params, decay)
    return s


# transitions ---------------------------------------------------------------

def test_transitions_at_half_millitesla():
    # D -/+ gamma B -/+ A/2 with gamma = 28 GHz/T, A = 3 MHz
    f = transition_frequencies(NV, 0.5e-3)
    np.testing.assert_allclose(f, [2854.5e6, 2857.5e6, 2882.5e6, 2885.5e6], rtol=0, atol=1e-3)
    assert abs(f.mean() - 2870e6) < 1e-3


def test_zero_field_degenerate_pairs():
    f = transition_frequencies(NV, 0.0)
    np.testing.assert_allclose(f, [2868.5e6, 2868.5e6, 2871.5e6, 2871.5e6])


def test_transitions_reject_strong_field():
    with pytest.raises(InvalidArgument):
        transition_frequencies(NV, 10e-3)
    with pytest.raises(InvalidArgument):
        transition_frequencies(NV, np.nan)


@given(st.floats(-9e-3, 9e-3))
def test_transitions_symmetric_about_d(b):
    f = transition_frequencies(NV, b)
    assert np.all(np.diff(f) >= 0)
    np.testing.assert_allclose(f + f[::-1], 2 * NV.zero_field_splitting_D, rtol=1e-14)


def test_branch_frequencies_are_lower_pair():
    np.testing.assert_allclose(branch_frequencies(NV, 0.5e-3), transition_frequencies(NV, 0.5e-3)[:2])


def test_odmr_dips_at_transitions():
    f = transition_frequencies(NV, 0.5e-3)
    s = odmr_signal(f, NV, 0.5e-3)
    off = odmr_signal(np.array([2.80e9]), NV, 0.5e-3)
    assert np.all(s < off[0])
    assert off[0] == pytest.approx(1.0, abs=1e-3)


# pulses and free evolution -------------------------------------------------

def test_pi_pulse_inverts_population():
    s = run_segments([LaserInit(), MwPulse(np.pi)])
    assert s.p_dark == pytest.approx(1.0, abs=1e-15)


def test_pi_half_gives_equal_superposition():
    s = run_segments([LaserInit(), MwPulse(np.pi / 2)])
    assert s.p_dark == pytest.approx(0.5, abs=1e-15)


@given(st.floats(-10, 10), st.floats(-np.pi, np.pi), st.floats(0, 5e-6))
@settings(max_examples=50)
def test_rotations_preserve_norm_without_decay(angle, phase, t):
    s = run_segments([LaserInit(), MwPulse(angle, phase), FreeEvolve(t), MwPulse(angle / 3, -phase)])
    np.testing.assert_allclose(np.linalg.norm(s.branches, axis=1), 1.0, rtol=1e-12)
    assert 0.0 <= s.p_dark <= 1.0


def test_ramsey_closed_form():
    # resonant carrier offset by delta: p_dark = (1 + E cos(2 pi delta_i t))/2 per branch
    delta, t = 5e6, 0.4e-6
    decay = dephasing(NV, refocused=False)
    segs = [LaserInit(), MwPulse(np.pi / 2, detuning=delta), FreeEvolve(t), MwPulse(np.pi / 2, detuning=delta), Readout()]
    s = run_segments(segs, FieldAtNv.along_axis(0.5e-3), decay)
    E = np.exp(-((t / NV.t2_star) ** 1))
    phases = 2 * np.pi * (delta + np.array([NV.hyperfine_A / 2, -NV.hyperfine_A / 2])) * t
    expected = np.mean((1 + E * np.cos(phases)) / 2)
    assert s.p_dark == pytest.approx(expected, abs=1e-12)


def test_hahn_refocuses_static_detuning():
    tau = 3e-6
    segs = [LaserInit(), MwPulse(np.pi / 2, detuning=2e6), FreeEvolve(tau), MwPulse(np.pi), FreeEvolve(tau), MwPulse(np.pi / 2)]
    s = run_segments(segs, FieldAtNv.along_axis(0.5e-3))
    assert s.p_dark == pytest.approx(0.0, abs=1e-12)


def test_hahn_decay_and_phase_inversion():
    tau = 5e-6
    decay = dephasing(NV, refocused=True)
    base = [LaserInit(), MwPulse(np.pi / 2), FreeEvolve(tau), MwPulse(np.pi), FreeEvolve(tau)]
    s0 = run_segments(base + [MwPulse(np.pi / 2)], decay=decay)
    s1 = run_segments(base + [MwPulse(np.pi / 2, np.pi)], decay=decay)
    E = np.exp(-((2 * tau / NV.t2) ** 2))
    assert s0.p_dark == pytest.approx((1 - E) / 2, abs=1e-12)
    assert s1.p_dark == pytest.approx((1 + E) / 2, abs=1e-12)


def test_split_free_evolution_equals_single():
    decay = dephasing(NV, refocused=False)
    a = run_segments([LaserInit(), MwPulse(np.pi / 2), FreeEvolve(0.7e-6)], decay=decay)
    b = run_segments([LaserInit(), MwPulse(np.pi / 2), FreeEvolve(0.3e-6), FreeEvolve(0.4e-6)], decay=decay)
    np.testing.assert_allclose(a.branches, b.branches, atol=1e-14)


def test_unknown_segment_raises_protocol_error():
    with pytest.raises(ProtocolError):
        evolve(SpinState(), object(), FieldAtNv.along_axis(0.0), NV)


def test_negative_duration_rejected():
    with pytest.raises(InvalidArgument):
        evolve(SpinState(), FreeEvolve(-1e-9), FieldAtNv.along_axis(0.0), NV)


# AC field -------------------------------------------------------------------

@given(st.floats(1e4, 1e6), st.floats(-np.pi, np.pi), st.floats(0, 20e-6), st.floats(0, 20e-6))
@settings(max_examples=40)
def test_ac_integral_matches_quadrature(f, phi, a, b):
    lo, hi = sorted((a, b))
    fld = FieldAtNv.along_axis(0.0, ac_amplitude=1e-6, ac_frequency=f, ac_phase=phi, ac_start=1e-6, ac_stop=15e-6)

    def bfield(t):
        return 1e-6 * np.sin(2 * np.pi * f * (t - 1e-6) + phi) if 1e-6 <= t <= 15e-6 else 0.0

    pts = [p for p in (1e-6, 15e-6) if lo < p < hi]
    ref = quad(bfield, lo, hi, points=pts or None, limit=400, epsabs=1e-22)[0] if hi > lo else 0.0
    assert ac_field_integral(fld, lo, hi) == pytest.approx(ref, abs=1e-18)


def test_synchronized_echo_phase():
    # sine drive locked to one echo period: net phase 4 gamma b_ac two_tau
    two_tau, b_ac = 10e-6, 2e-9
    fld = FieldAtNv.along_axis(0.0, ac_amplitude=b_ac, ac_frequency=1 / two_tau, ac_start=0.0, ac_stop=two_tau)
    diff = ac_field_integral(fld, 0, two_tau / 2) - ac_field_integral(fld, two_tau / 2, two_tau)
    phase = 2 * np.pi * NV.gyro_e * diff
    assert phase == pytest.approx(4 * NV.gyro_e * b_ac * two_tau, rel=1e-12)


# readout ---------------------------------------------------------------------

def test_expected_counts_bright_and_dark():
    bright = run_segments([LaserInit()])
    dark = run_segments([LaserInit(), MwPulse(np.pi)])
    assert expected_counts(bright, NV) == pytest.approx(NV.photons_bright)
    assert expected_counts(dark, NV) == pytest.approx(NV.photons_bright * (1 - NV.contrast_c))


def test_readout_statistics():
    s = run_segments([LaserInit(), MwPulse(np.pi / 2)])
    rng = np.random.default_rng(3)
    r = readout(s, NV, 200_000, rng)
    lam = NV.photons_bright * (1 - NV.contrast_c / 2)
    assert r.expected == pytest.approx(lam)
    assert abs(r.mean - lam) < 5 * np.sqrt(lam / 200_000)
    assert r.counts.var() == pytest.approx(lam, rel=0.03)


def test_aggregate_readout_distribution():
    s = run_segments([LaserInit()])
    means = [readout(s, NV, 1000, np.random.default_rng(i), aggregate=True).mean for i in range(400)]
    assert np.std(means) == pytest.approx(np.sqrt(NV.photons_bright / 1000), rel=0.15)


def test_params_validation():
    with pytest.raises(InvalidArgument):
        NvParams(contrast_c=1.5)
    with pytest.raises(InvalidArgument):
        NvParams(t2=-1.0)


def test_state_arrays_are_read_only():
    s = SpinState()
    with pytest.raises(ValueError):
        s.branches[0, 0] = 2.0
