import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvgmi.errors import InvalidArgument, ProtocolError
from nvgmi.sequences import (
    PulseSequence,
    SweepPlan,
    build_hahn,
    build_odmr,
    build_rabi,
    build_ramsey,
    build_sync_magnetometry,
    with_drive,
    with_tau,
)
from nvgmi.spin import NvParams
from nvgmi.timeline import FreeEvolve, LaserInit, MwPulse, Readout, RfDrive

NV = NvParams()


def echo(f_ac=1e5, phase=0.0, v=1.0, tau=5e-6, tag=None):
    return PulseSequence(
        (LaserInit(), RfDrive(3e-6, 3e-6 + 2 * tau, v, f_ac, phase), MwPulse(np.pi / 2), FreeEvolve(tau), MwPulse(np.pi), FreeEvolve(tau), MwPulse(np.pi / 2), Readout()),
        sync_tag=tag,
    )


@pytest.mark.parametrize(
    "kwargs, tag",
    [
        (dict(), "synchronized"),
        (dict(f_ac=2e5), "async_frequency"),
        (dict(f_ac=1.5e5), "async_frequency"),
        (dict(phase=np.pi / 2), "async_phase"),
        (dict(phase=2 * np.pi), "synchronized"),
        (dict(v=0.0), "no_rf"),
    ],
)
def test_sync_tag_from_segment_data(kwargs, tag):
    assert echo(**kwargs).sync_tag == tag


def test_declared_tag_must_match():
    assert echo(tag="synchronized").sync_tag == "synchronized"
    with pytest.raises(ProtocolError) as exc:
        echo(f_ac=2e5, tag="synchronized")
    assert exc.value.segment_index == 1
    assert "segment 1" in str(exc.value)


@given(st.floats(0.1, 4.0).filter(lambda m: abs(m - 1) > 1e-6), st.floats(-3, 3))
@settings(max_examples=40)
def test_sync_predicate(m, phi):
    s = echo(f_ac=m * 1e5, phase=phi)
    assert s.sync_tag == s.computed_sync_tag()
    assert s.sync_tag == "async_frequency"


@pytest.mark.parametrize(
    "segs, index",
    [
        ((MwPulse(np.pi), LaserInit(), Readout()), 0),
        ((LaserInit(), MwPulse(np.pi)), 1),
        ((LaserInit(), Readout(), MwPulse(np.pi)), 1),
        ((LaserInit(), LaserInit(), Readout()), 1),
        ((LaserInit(), FreeEvolve(-1.0), Readout()), 1),
        ((LaserInit(), RfDrive(0, 1.0, 1, 1e5), Readout()), 1),
    ],
)
def test_layout_violations_carry_segment_index(segs, index):
    with pytest.raises(ProtocolError) as exc:
        PulseSequence(segs)
    assert exc.value.segment_index == index


def test_durations_and_free_time():
    s = echo(tau=5e-6)
    assert s.free_evolution_time == pytest.approx(10e-6)
    assert s.total_duration == pytest.approx(3e-6 + 10e-6 + 300e-9)
    assert s.refocused
    assert s.free_window() == pytest.approx((3e-6, 13e-6))


def test_ramsey_not_refocused():
    seq, _ = build_ramsey([1e-7, 2e-7], 1e6, NV)
    assert not seq.refocused


def test_document_round_trip_and_hash():
    s = echo()
    back = PulseSequence.from_document(s.to_document())
    assert back == s
    assert back.sha256() == s.sha256()
    assert echo(f_ac=2e5).sha256() != s.sha256()


def test_canonical_is_stable():
    assert echo().canonical() == echo().canonical()
    assert " " not in echo().canonical()


def test_sweep_plan_validation():
    with pytest.raises(InvalidArgument):
        SweepPlan("tau", [1, 2, 2], 10, 0)
    with pytest.raises(InvalidArgument):
        SweepPlan("tau", [], 10, 0)
    with pytest.raises(InvalidArgument):
        SweepPlan("tau", [1, 2], 0, 0)
    with pytest.raises(InvalidArgument):
        SweepPlan("tau", [1, 2], 10, 2**64)
    with pytest.raises(InvalidArgument):
        SweepPlan("nope", [1, 2], 10, 0)
    p = SweepPlan("tau", [3, 2, 1], 10, 5)
    assert p.values.tolist() == [3, 2, 1]
    assert not p.values.flags.writeable


def test_odmr_range_must_bracket_d():
    with pytest.raises(InvalidArgument):
        build_odmr(np.linspace(2.90e9, 2.95e9, 10), NV)
    with pytest.raises(InvalidArgument):
        build_odmr([], NV)


def test_magnetometry_drive_spans_both_arms():
    seq, plan = build_sync_magnetometry(10e-6, 1.0, b_dc_values=[1e-3, 1.1e-3])
    d = seq.rf_drives[0]
    assert (d.t_start, d.t_stop) == pytest.approx(seq.free_window())
    assert d.f_ac * 10e-6 == pytest.approx(1.0)
    assert seq.sync_tag == "synchronized"
    assert plan.variable == "b_dc"
    with pytest.raises(InvalidArgument):
        build_sync_magnetometry(10e-6, 1.0, b_dc_values=[])


def test_with_tau_stretches_drive_window():
    seq, _ = build_sync_magnetometry(10e-6, 1.0, b_dc_values=[1e-3])
    s2 = with_tau(seq, 10e-6)
    d = s2.rf_drives[0]
    assert d.t_stop - d.t_start == pytest.approx(20e-6)
    # f_ac is not rescaled, so the stretched echo is no longer matched
    assert s2.sync_tag == "async_frequency"


def test_with_drive():
    seq, _ = build_sync_magnetometry(10e-6, 1.0, b_dc_values=[1e-3])
    assert with_drive(seq, v_ac=0.0).sync_tag == "no_rf"
    assert with_drive(seq, phase=np.pi / 2).sync_tag == "async_phase"


def test_builders_labels():
    assert build_rabi([0, 1e-8], NV)[0].label == "rabi"
    assert build_hahn([1e-6, 2e-6], NV)[0].label == "hahn"
    with pytest.raises(InvalidArgument):
        build_hahn([0.0, 1e-6], NV)
