import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvgmi import presets
from nvgmi.constants import BOLTZMANN, MU_0
from nvgmi.errors import InvalidArgument, OutOfRegime, SingularityError
from nvgmi.gmi import (
    DomainChain,
    GmiWire,
    NoiseParams,
    ac_field_at_nv,
    gmi_ratio,
    impedance,
    intrinsic_noise,
    permeability,
    skin_depth,
    steepest_bias,
    stray_field,
)

WIRE = presets.WIRE_PRESETS["paper-wire"]


def bessel_series(n, z, terms=80):
    """J_n(z) from its power series; independent of scipy."""
    total = 0j
    half = z / 2
    for k in range(terms):
        total += (-1) ** k * half ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n))
    return total


def z_oracle(wire, f, h):
    mu = 1.0 + (wire.mu_max - 1.0) / (1.0 + (h / wire.h_k) ** 2)
    delta = math.sqrt(wire.resistivity_rho / (math.pi * f * mu * MU_0))
    ka = (1 - 1j) * wire.radius_a / delta
    return wire.r_dc * (ka / 2) * bessel_series(0, ka) / bessel_series(1, ka), abs(ka)


def test_skin_depth_direct_evaluation_grid():
    f = np.geomspace(1e3, 1e8, 100)
    mu = np.linspace(1.0, 1e5, 100)
    rho = 1.3e-6
    direct = np.array([math.sqrt(2 * rho / (2 * math.pi * ff * mm * MU_0)) for ff, mm in zip(f, mu)])
    np.testing.assert_allclose(skin_depth(f, mu, rho), direct, rtol=1e-12)


def test_skin_depth_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        skin_depth(0.0, 10.0, 1e-6)
    with pytest.raises(InvalidArgument):
        skin_depth(1e5, 0.5, 1e-6)
    with pytest.raises(InvalidArgument):
        skin_depth(1e5, 10.0, -1.0)


@pytest.mark.parametrize("f", [1e3, 1e4, 3e4, 1e5, 3e5])
@pytest.mark.parametrize("h", [0.0, 800.0, 5000.0, 40000.0])
def test_impedance_matches_series_oracle(f, h):
    ref, ka = z_oracle(WIRE, f, h)
    if ka >= 10:
        pytest.skip("series oracle restricted to |ka| < 10")
    z = complex(impedance(WIRE, f, h))
    assert abs(z - ref) / abs(ref) < 1e-8


def test_dc_limit():
    w = GmiWire(mu_max=1.0)
    f = 1e3
    a_over_delta = w.radius_a / skin_depth(f, 1.0, w.resistivity_rho)
    assert a_over_delta < 0.05
    assert abs(impedance(w, f, 0.0) - w.r_dc) / w.r_dc < 1e-3


def test_strong_skin_effect_uses_scaled_bessel():
    # far past where unscaled J0/J1 overflow, Z tends to r_dc (ka)/2 * i
    w = GmiWire(mu_max=1e6, h_k=1e3)
    z = impedance(w, 1e8, 0.0)
    assert np.isfinite(z)
    delta = skin_depth(1e8, permeability(w, 0.0), w.resistivity_rho)
    ka = (1 - 1j) * w.radius_a / delta
    assert z == pytest.approx(w.r_dc * ka / 2 * 1j, rel=2e-3)


def test_out_of_regime():
    w = GmiWire(mu_max=1e8, h_k=1e3)
    with pytest.raises(OutOfRegime):
        impedance(w, 1e10, 0.0)


def test_gmi_ratio_zero_at_saturation():
    assert gmi_ratio(WIRE, 1e5, WIRE.h_sat) == pytest.approx(0.0, abs=1e-12)


def test_gmi_ratio_several_hundred_percent_in_skin_regime():
    # ratio grows with a/delta; at a/delta of order 5-10 it runs into hundreds of percent
    f = 1e6
    a_over_delta = WIRE.radius_a / skin_depth(f, permeability(WIRE, 0.0), WIRE.resistivity_rho)
    assert 4 < a_over_delta < 15
    assert 200 < gmi_ratio(WIRE, f, 0.0) < 2000


@given(st.floats(1e4, 3e6))
@settings(max_examples=25)
def test_gmi_ratio_peaks_at_zero_field(f):
    h = np.linspace(-3 * WIRE.h_sat, 3 * WIRE.h_sat, 301)
    r = gmi_ratio(WIRE, f, h)
    assert np.argmax(r) == 150
    np.testing.assert_allclose(r, r[::-1], rtol=1e-9, atol=1e-9)


def test_double_peak_permeability():
    w = GmiWire(peak_offset=2000.0)
    h = np.linspace(-6000, 6000, 1201)
    mu = permeability(w, h)
    assert abs(abs(h[np.argmax(mu)]) - 2000) < 200
    assert mu[600] < mu.max()


def test_ac_field_at_nv_ampere_law():
    b = ac_field_at_nv(WIRE, 1.0, 1e5, 1e-3)
    i = 1.0 / abs(impedance(WIRE, 1e5, 1e-3 / MU_0))
    assert b == pytest.approx(WIRE.transduction_gain_G * MU_0 * i / (2 * math.pi * WIRE.standoff_r), rel=1e-14)
    assert ac_field_at_nv(WIRE, 2.0, 1e5, 1e-3) == pytest.approx(2 * b, rel=1e-14)
    with pytest.raises(InvalidArgument):
        ac_field_at_nv(WIRE, -1.0, 1e5, 0.0)


def test_operating_window_brackets_steepest_bias():
    b, slope = steepest_bias(WIRE, 1.0 / presets.OPERATING_TWO_TAU)
    lo, hi = presets.OPERATING_WINDOW
    assert lo < b < hi
    assert slope > 0


def test_intrinsic_noise_nominal():
    w = GmiWire(radius_a=30e-6, length_l=10e-3, standoff_r=50e-6)
    n = NoiseParams()
    ref = math.sqrt(2 * 0.01 * BOLTZMANN * 300 / (2.8e10 * 660e3 * math.pi**2 * (30e-6) ** 2 * 10e-3))
    assert intrinsic_noise(w, n) == pytest.approx(ref, rel=1e-12)
    assert intrinsic_noise(w, n) == pytest.approx(7.1039e-15, rel=1e-4)


@given(st.floats(1.1, 4.0))
def test_intrinsic_noise_scaling(k):
    w = GmiWire(radius_a=30e-6, length_l=10e-3, standoff_r=500e-6)
    w2 = GmiWire(radius_a=30e-6 * k, length_l=10e-3, standoff_r=500e-6)
    assert intrinsic_noise(w, NoiseParams()) / intrinsic_noise(w2, NoiseParams()) == pytest.approx(k, rel=1e-12)


def test_wire_validation():
    with pytest.raises(InvalidArgument):
        GmiWire(radius_a=-1.0)
    with pytest.raises(InvalidArgument):
        GmiWire(standoff_r=1e-6)
    with pytest.raises(InvalidArgument):
        NoiseParams(alpha=0.0)


# domain chain -----------------------------------------------------------------

def dipole_sum(points, moments, r):
    out = np.zeros(3)
    for p, m in zip(points, moments):
        d = np.asarray(r) - p
        dist = math.sqrt(d @ d)
        out += MU_0 / (4 * math.pi) * (3 * d * (m @ d) / dist**2 - m) / dist**3
    return out


def test_stray_field_matches_dipole_sum():
    chain = DomainChain.alternating(**presets.CHAIN_PRESETS["default-chain"])
    for r in ([10e-6, 15e-6, -12.5e-6], [33e-6, -4e-6, 5e-6]):
        np.testing.assert_allclose(stray_field(chain, r), dipole_sum(chain.points, chain.moments, r), rtol=1e-12)


def test_stray_field_on_axis_single_dipole():
    chain = DomainChain(np.array([0.0]), np.array([[1e-12, 0, 0]]))
    b = stray_field(chain, [2e-6, 0, 0])
    assert b[0] == pytest.approx(MU_0 / (4 * math.pi) * 2e-12 / (2e-6) ** 3, rel=1e-12)


def test_stray_field_flip_negates():
    chain = DomainChain.alternating()
    pts = np.array([[5e-6, 10e-6, -12.5e-6], [20e-6, -7e-6, -12.5e-6]])
    np.testing.assert_array_equal(stray_field(chain.flipped(), pts), -stray_field(chain, pts))


def test_default_chain_field_scale():
    chain = DomainChain.alternating(**presets.CHAIN_PRESETS["default-chain"])
    x = np.linspace(0, 50e-6, 21)
    pts = np.column_stack([x, np.full_like(x, 15e-6), np.full_like(x, -12.5e-6)])
    b = np.linalg.norm(stray_field(chain, pts), axis=1)
    assert 0.1e-3 < b.min() and b.max() < 1e-3


def test_stray_field_singularity():
    chain = DomainChain.alternating()
    with pytest.raises(SingularityError):
        stray_field(chain, chain.points[3])


def test_chain_validation():
    with pytest.raises(InvalidArgument):
        DomainChain(np.array([0.0, 1e-6]), np.zeros((1, 3)))
    with pytest.raises(InvalidArgument):
        DomainChain.alternating(n_dipoles=10, n_domains=4)
