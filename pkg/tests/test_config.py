"""Config parsing: units, validation paths, canonical form, hashing."""

import json
import math

import pytest

from squeezesim.config import (
    SWEEPABLE,
    config_from_dict,
    load_config,
    loads_config,
    parse_grid,
    serialize_config,
)
from squeezesim.errors import ConfigError

BASE = {
    "oscillator": {"mass_ng": 30.0, "frequency_mhz": 1.3, "quality_factor": 1.3e4},
    "bath": {"temperature_k": 300.0},
}


def _cfg(**extra):
    d = {k: dict(v) for k, v in BASE.items()}
    d.update(extra)
    return config_from_dict(d)


def test_minimal_config():
    cfg = _cfg()
    assert cfg.oscillator.mass == pytest.approx(30e-12)
    assert cfg.oscillator.omega_m == pytest.approx(2 * math.pi * 1.3e6)
    assert cfg.bath.temperature == 300.0
    assert cfg.drive.gs is None
    assert cfg.feedback.gfb == 0.0
    assert cfg.readout is None


def test_unit_alternates_agree():
    si = config_from_dict({
        "oscillator": {"mass_kg": 30e-12, "frequency_hz": 1.3e6,
                       "quality_factor": 1.3e4},
        "bath": {"temperature_k": 300.0},
    })
    assert si.data == _cfg().data
    assert si.config_hash == _cfg().config_hash


def test_omega_alternate():
    cfg = config_from_dict({
        "oscillator": {"mass_kg": 1e-12, "omega_rad_per_s": 2 * math.pi * 5e5,
                       "quality_factor": 100.0},
        "bath": {"temperature_k": 4.0},
    })
    assert cfg.data["oscillator"]["frequency_hz"] == pytest.approx(5e5)


def test_gamma_hz_route():
    cfg = config_from_dict({
        "oscillator": {"mass_kg": 1e-12, "frequency_hz": 1e6, "gamma_hz": 100.0},
        "bath": {"temperature_k": 300.0},
    })
    assert cfg.oscillator.q == pytest.approx(1e4)
    # canonical form stores quality_factor regardless of input route
    assert cfg.data["oscillator"]["quality_factor"] == pytest.approx(1e4)


def test_conflicting_units_rejected():
    with pytest.raises(ConfigError) as err:
        config_from_dict({
            "oscillator": {"mass_kg": 30e-12, "mass_ng": 30.0,
                           "frequency_hz": 1e6, "quality_factor": 1e4},
            "bath": {"temperature_k": 300.0},
        })
    assert "oscillator.mass" in str(err.value)


def test_q_and_gamma_conflict():
    with pytest.raises(ConfigError):
        config_from_dict({
            "oscillator": {"mass_kg": 1e-12, "frequency_hz": 1e6,
                           "quality_factor": 1e4, "gamma_hz": 100.0},
            "bath": {"temperature_k": 300.0},
        })


def test_unknown_key_path():
    with pytest.raises(ConfigError) as err:
        _cfg(drive={"gs": 0.5, "squeezyness": 3})
    assert err.value.path == "drive.squeezyness"


def test_unknown_section_rejected():
    with pytest.raises(ConfigError) as err:
        _cfg(turbo={"on": 1})
    assert err.value.path == "turbo"


def test_missing_required_sections():
    with pytest.raises(ConfigError):
        config_from_dict({"bath": {"temperature_k": 300.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"oscillator": dict(BASE["oscillator"])})


def test_vp_vth_fold_to_gs():
    cfg = _cfg(drive={"vp_mv": 74.0, "vth_mv": 148.0})
    assert cfg.drive.gs == pytest.approx(0.5)
    assert cfg.vp_volts == pytest.approx(0.074)
    assert cfg.vth_volts == pytest.approx(0.148)


def test_inconsistent_gs_vs_voltages():
    with pytest.raises(ConfigError) as err:
        _cfg(drive={"gs": 0.8, "vp_volts": 0.074, "vth_volts": 0.148})
    assert err.value.path == "drive.gs"


def test_phase_whitelist():
    cfg = _cfg(drive={"gs": 0.1, "phase_deg": 90})
    assert cfg.drive.phi_p == pytest.approx(math.pi / 2)
    cfg = _cfg(drive={"gs": 0.1, "phase_deg": -90})
    assert cfg.drive.phi_p == pytest.approx(-math.pi / 2)
    with pytest.raises(ConfigError):
        _cfg(drive={"gs": 0.1, "phase_deg": 45})


def test_readout_validation():
    cfg = _cfg(readout={"gamma_qba": 0.01, "eta_det": 0.77})
    assert cfg.readout.eta_det == 0.77
    with pytest.raises(ConfigError):
        _cfg(readout={"eta_det": 0.9})
    with pytest.raises(ConfigError):
        _cfg(readout={"gamma_qba": 0.01, "eta_det": 1.2})


def test_capacitor_units():
    cfg = _cfg(capacitor={"alpha_pf_nm": 0.012, "c0_ff": 16.0, "d0_um": 1.0,
                          "vdc_volts": 8.0})
    assert cfg.capacitor.alpha == pytest.approx(12e-21)
    assert cfg.capacitor.c0 == pytest.approx(16e-15)
    assert cfg.capacitor.d0 == pytest.approx(1e-6)


def test_sweep_whitelist():
    cfg = _cfg(sweep={"variable": "drive.vp_volts", "values": [0.01, 0.02]})
    assert cfg.sweep.variable == "drive.vp_volts"
    assert cfg.sweep.values == (0.01, 0.02)
    assert cfg.sweep.model == "variance"
    with pytest.raises(ConfigError):
        _cfg(sweep={"variable": "oscillator.mass_kg", "values": [1.0]})
    with pytest.raises(ConfigError):
        _cfg(sweep={"variable": "drive.gs", "values": []})
    assert "drive.gs" in SWEEPABLE


def test_capacitor_sweep_needs_section():
    with pytest.raises(ConfigError) as err:
        _cfg(sweep={"variable": "capacitor.vp_volts", "values": [1.0, 2.0]})
    assert "capacitor" in str(err.value)


def test_seed_forms():
    count = _cfg(run={"duration_s": 1.0, "dt_s": 1e-5, "seeds": 5})
    assert count.run.seeds == (0, 1, 2, 3, 4)
    listed = _cfg(run={"duration_s": 1.0, "dt_s": 1e-5, "seeds": [3, 7, 11]})
    assert listed.run.seeds == (3, 7, 11)
    for bad in (0, -1, [], [2, -3], [1.5], True):
        with pytest.raises(ConfigError):
            _cfg(run={"duration_s": 1.0, "dt_s": 1e-5, "seeds": bad})


def test_run_validation():
    cfg = _cfg(run={"duration_s": 2.0, "dt_s": 1e-5, "seeds": 1,
                    "mode": "position", "segment_length": 8192,
                    "discard_s": 0.5})
    assert cfg.run.mode == "position"
    assert cfg.run.segment_length == 8192
    assert cfg.run.discard == 0.5
    with pytest.raises(ConfigError):
        _cfg(run={"duration_s": 2.0, "dt_s": 1e-5, "seeds": 1, "mode": "warp"})
    with pytest.raises(ConfigError):
        _cfg(run={"duration_s": 2.0, "dt_s": 1e-5, "seeds": 1,
                  "segment_length": 3})
    with pytest.raises(ConfigError):
        _cfg(run={"duration_s": 2.0, "dt_s": 1e-5, "seeds": 1,
                  "overlap_fraction": 1.0})


def test_map_grids():
    cfg = _cfg(map={"kind": "purity", "x": "0.1:10:5,log", "y": "0:4:9"})
    assert cfg.map.kind == "purity"
    xs = cfg.map.x.values()
    assert xs.size == 5
    assert xs[0] == pytest.approx(0.1)
    assert xs[-1] == pytest.approx(10.0)
    ys = cfg.map.y.values()
    assert ys[1] - ys[0] == pytest.approx(0.5)


def test_parse_grid_errors():
    g = parse_grid("1:100:7,log")
    assert g.log and g.n == 7
    assert parse_grid("0:1:2").values()[0] == 0.0
    for bad in ("1:2", "1:2:1", "0:10:5,log", "1:2:3,quadratic", "a:b:c"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_number_type_checking():
    with pytest.raises(ConfigError):
        _cfg(bath={"temperature_k": "cold"})
    with pytest.raises(ConfigError):
        _cfg(bath={"temperature_k": True})
    with pytest.raises(ConfigError):
        _cfg(bath={"temperature_k": -4.0})
    with pytest.raises(ConfigError):
        config_from_dict({
            "oscillator": {"mass_kg": 0.0, "frequency_hz": 1e6,
                           "quality_factor": 1e4},
            "bath": {"temperature_k": 300.0},
        })


TOML_TEXT = """
[oscillator]
mass_ng = 30.0
frequency_mhz = 1.3
quality_factor = 13000.0

[bath]
temperature_k = 300.0

[drive]
vp_mv = 74.0
vth_mv = 148.0

[sweep]
variable = "drive.vp_volts"
values = [0.01, 0.02, 0.04]
"""


def test_toml_and_json_equivalent(tmp_path):
    toml_file = tmp_path / "exp.toml"
    toml_file.write_text(TOML_TEXT)
    from_toml = load_config(toml_file)

    json_file = tmp_path / "exp.json"
    json_file.write_text(json.dumps({
        "oscillator": {"mass_ng": 30.0, "frequency_mhz": 1.3,
                       "quality_factor": 13000.0},
        "bath": {"temperature_k": 300.0},
        "drive": {"vp_mv": 74.0, "vth_mv": 148.0},
        "sweep": {"variable": "drive.vp_volts", "values": [0.01, 0.02, 0.04]},
    }))
    from_json = load_config(json_file)
    assert from_toml.data == from_json.data
    assert from_toml.config_hash == from_json.config_hash


def test_serialize_round_trip(tmp_path):
    cfg = loads_config(TOML_TEXT)
    text = serialize_config(cfg)
    again = loads_config(text)
    assert again.data == cfg.data
    assert again.config_hash == cfg.config_hash
    # and once more through a file
    f = tmp_path / "canon.json"
    f.write_text(text)
    assert load_config(f).data == cfg.data


def test_hash_sensitivity():
    a = _cfg(drive={"gs": 0.5})
    b = _cfg(drive={"gs": 0.25})
    assert a.config_hash != b.config_hash
    c = _cfg(run={"duration_s": 1.0, "dt_s": 1e-5, "seeds": [0, 1]})
    d = _cfg(run={"duration_s": 1.0, "dt_s": 1e-5, "seeds": [0, 2]})
    assert c.config_hash != d.config_hash
    assert len(a.config_hash) == 12


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "broken.toml"
    bad.write_text("[oscillator\nmass_kg = ")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        loads_config("not a config at all :::")
