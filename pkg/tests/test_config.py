import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvgmi import presets
from nvgmi.config import load_config, parse_quantity
from nvgmi.errors import ConfigError
from nvgmi.gmi import DomainChain


# presets -----------------------------------------------------------------------

def test_catalog_reference_entries():
    cat = presets.catalog()
    assert cat["nv"]["paper-nv"]["t2"] == 21e-6
    assert cat["nv"]["paper-nv"]["t2_star"] == 0.69e-6
    assert cat["nv"]["paper-nv"]["hyperfine_A"] == 3e6
    w = cat["wire"]["paper-wire"]
    assert w["r_dc"] == 10.2
    assert 2 * w["radius_a"] == pytest.approx(25e-6)
    assert w["length_l"] == pytest.approx(30e-3)
    assert {"pristine", "plated", "plated+annealed"} <= set(cat["wire"])


def test_catalog_round_trip():
    text = presets.catalog_json()
    back = presets.catalog_from_json(text)
    assert back["nv"]["paper-nv"] == presets.NV_PRESETS["paper-nv"]
    for pid, w in presets.WIRE_PRESETS.items():
        assert back["wire"][pid] == w
    assert back["chain"] == presets.CHAIN_PRESETS
    assert presets.catalog_json() == text


def test_text_catalog_lists_every_id():
    text = presets.format_catalog()
    for table in (presets.NV_PRESETS, presets.WIRE_PRESETS, presets.CHAIN_PRESETS, presets.NOISE_PRESETS):
        for pid in table:
            assert pid in text


def test_stored_gain_is_calibrated():
    w = presets.WIRE_PRESETS["paper-wire"]
    assert presets.calibrated_gain(w) == pytest.approx(w.transduction_gain_G, rel=1e-4)


def test_get_unknown_id_names_it():
    with pytest.raises(ConfigError) as exc:
        presets.get("wire", "copper")
    assert "'copper'" in str(exc.value)
    assert "paper-wire" in str(exc.value)
    assert isinstance(presets.get("chain", "default-chain"), DomainChain)


def test_override_rejects_unknown_field():
    nv = presets.NV_PRESETS["paper-nv"]
    assert presets.override(nv, {"t2": 30e-6}, "overrides.nv").t2 == 30e-6
    with pytest.raises(ConfigError) as exc:
        presets.override(nv, {"t3": 1.0}, "overrides.nv")
    assert exc.value.path == "overrides.nv.t3"


# units -------------------------------------------------------------------------

@pytest.mark.parametrize(
    "text, dim, value",
    [
        ("10 us", "time", 1e-05),
        ("10 µs", "time", 1e-05),
        ("0.69us", "time", 0.69e-6),
        ("2.87 GHz", "frequency", 2.87e9),
        ("0.5 mT", "field", 0.5e-3),
        ("1 V", "voltage", 1.0),
        ("25 um", "length", 25e-6),
        ("3 m", "length", 3.0),
        ("2.6 uT/mA", "field_per_current", 2.6e-3),
        ("90 deg", "angle", math.pi / 2),
        ("-60 mA", "current", -60e-3),
    ],
)
def test_parse_quantity(text, dim, value):
    assert parse_quantity(text, dim, "x") == value


@given(st.integers(1, 10**6), st.sampled_from([("ms", 1e3), ("us", 1e6), ("ns", 1e9)]))
def test_negative_prefix_is_correctly_rounded(n, unit):
    suffix, scale = unit
    assert parse_quantity(f"{n} {suffix}", "time", "x") == n / scale


@pytest.mark.parametrize("text", [10, 1e-5, "10", "10 furlongs", "ten us", True, None])
def test_parse_quantity_rejects(text):
    with pytest.raises(ConfigError):
        parse_quantity(text, "time", "params.two_tau")


def test_dimension_mismatch():
    with pytest.raises(ConfigError) as exc:
        parse_quantity("1 mT", "time", "params.two_tau")
    assert exc.value.path == "params.two_tau"
    assert "field" in str(exc.value)


# config documents -----------------------------------------------------------------

FULL = """
experiment: magnetometry
seed: 42
shots: 500000
presets:
  wire: pristine
sweep:
  start: 0.975 mT
  stop: 1.125 mT
  points: 11
params:
  two_tau: 10 us
  v_ac: 0.5 V
overrides:
  nv:
    t2: 25 us
output: results
"""


def test_full_document():
    cfg = load_config(FULL)
    assert cfg.experiment == "magnetometry"
    assert cfg.seed == 42 and cfg.shots == 500_000
    assert cfg.presets["wire"] == "pristine"
    assert cfg.presets["nv"] == "paper-nv"
    assert (cfg.sweep.start, cfg.sweep.stop, cfg.sweep.points) == (0.975e-3, 1.125e-3, 11)
    assert cfg.params == {"two_tau": 1e-05, "v_ac": 0.5}
    assert cfg.overrides == {"nv": {"t2": 25e-6}}
    assert cfg.output == "results"
    assert len(cfg.source_sha256) == 64


def test_seed_is_mandatory():
    with pytest.raises(ConfigError) as exc:
        load_config("experiment: hahn\n")
    assert exc.value.path == "seed"
    assert load_config("experiment: hahn\n", seed_override=3).seed == 3


@pytest.mark.parametrize(
    "doc, path",
    [
        ("experiment: hahn\nseed: 1\ncolour: red\n", "colour"),
        ("experiment: hahn\nseed: 1\nparams:\n  two_tau: 10 us\n", "params.two_tau"),
        ("experiment: magnetometry\nseed: 1\nparams:\n  two_tau: 10\n", "params.two_tau"),
        ("experiment: magnetometry\nseed: 1\nparams:\n  v_ac: 1 mT\n", "params.v_ac"),
        ("experiment: hahn\nseed: 1\noverrides:\n  nv:\n    t3: 1 us\n", "overrides.nv.t3"),
        ("experiment: hahn\nseed: 1\npresets:\n  nv: nope\n", "presets.nv"),
        ("experiment: hahn\nseed: -1\n", "seed"),
        ("experiment: hahn\nseed: 1.5\n", "seed"),
        ("experiment: hahn\nseed: 1\nshots: 0\n", "shots"),
        ("experiment: widefield\nseed: 1\nsweep:\n  start: 1 us\n  stop: 2 us\n  points: 3\n", "sweep"),
        ("experiment: hahn\nseed: 1\nsweep:\n  start: 1 us\n  stop: 2 us\n", "sweep"),
        ("experiment: teleport\nseed: 1\n", "experiment"),
    ],
)
def test_schema_violations_carry_path(doc, path):
    with pytest.raises(ConfigError) as exc:
        load_config(doc)
    assert exc.value.path == path
    assert str(exc.value).startswith(path)


def test_invalid_yaml():
    with pytest.raises(ConfigError):
        load_config("experiment: [hahn\n")
    with pytest.raises(ConfigError):
        load_config("- hahn\n")


def test_config_hash_tracks_text():
    a = load_config("experiment: hahn\nseed: 1\n")
    b = load_config("experiment: hahn\nseed: 2\n")
    assert a.source_sha256 != b.source_sha256
    assert a.source_sha256 == load_config("experiment: hahn\nseed: 1\n").source_sha256
