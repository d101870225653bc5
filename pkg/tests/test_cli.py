"""End-to-end command-line behavior: exit codes, file formats, overrides."""

import json
import math

import numpy as np
import pytest

from squeezesim.cli import main
from squeezesim.config import load_config
from squeezesim.pipelines import write_rows
from squeezesim.simulate import simulate_rotating
from squeezesim.version import VERSION

BASE_TOML = """
[oscillator]
mass_ng = 30.0
frequency_mhz = 1.3
quality_factor = 13000.0

[bath]
temperature_k = 300.0
"""

SWEEP_TOML = BASE_TOML + """
[drive]
vth_volts = 0.148

[sweep]
variable = "drive.vp_volts"
values = [0.0148, 0.0296, 0.0444, 0.0592, 0.074]

[run]
duration_s = 2.0
dt_s = 1e-5
seeds = 2
segment_length = 2048
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_mixed_csv(path):
    """Commented CSV with possibly non-numeric columns."""
    meta, header, rows = {}, None, []
    for line in open(path):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(line.split(","))
    cols = {}
    for i, name in enumerate(header):
        raw = [r[i] for r in rows]
        try:
            cols[name] = np.array([float(v) for v in raw])
        except ValueError:
            cols[name] = np.array(raw)
    return meta, cols


def test_predict_stdout(tmp_path, capsys):
    cfg = _write(tmp_path, "p.toml", BASE_TOML + "\n[drive]\ngs = 0.5\n")
    rc = main(["predict", "--config", cfg])
    out = capsys.readouterr().out
    assert rc == 0
    report = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(report["gs"]) == 0.5
    assert report["stable"] == "true"
    assert float(report["sigma1_ratio"]) == pytest.approx(1.0 / 1.5)
    assert float(report["sigma2_ratio"]) == pytest.approx(2.0)


def test_predict_unstable_point(tmp_path, capsys):
    cfg = _write(tmp_path, "p.toml", BASE_TOML + "\n[drive]\ngs = 1.5\n")
    rc = main(["predict", "--config", cfg])
    out = capsys.readouterr().out
    assert rc == 0
    assert "stable = false" in out
    assert "sigma2_ratio" not in out


def test_predict_csv_out(tmp_path):
    cfg = _write(tmp_path, "p.toml", BASE_TOML + "\n[drive]\ngs = 0.2\n")
    out = str(tmp_path / "report.csv")
    assert main(["predict", "--config", cfg, "--out", out]) == 0
    text = (tmp_path / "report.csv").read_text()
    assert text.startswith(f"# squeezesim {VERSION}\n")
    meta, cols = _read_mixed_csv(out)
    assert len(meta["config_hash"]) == 12
    assert meta["config_hash"] == load_config(cfg).config_hash
    assert "gs" in cols["key"]


def test_bad_config_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.toml", BASE_TOML + "\n[drive]\nwarp = 9\n")
    rc = main(["predict", "--config", cfg])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, capsys):
    rc = main(["predict", "--config", str(tmp_path / "nope.toml")])
    assert rc == 2


def test_sweep_runs_and_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, "sweep.toml", SWEEP_TOML)
    out1 = str(tmp_path / "a.csv")
    out2 = str(tmp_path / "b.csv")
    assert main(["sweep", "--config", cfg, "--out", out1]) == 0
    assert main(["sweep", "--config", cfg, "--out", out2]) == 0
    blob1 = (tmp_path / "a.csv").read_bytes()
    assert blob1 == (tmp_path / "b.csv").read_bytes()
    assert len(blob1) > 0

    meta, cols = _read_mixed_csv(out1)
    assert meta["variable"] == "drive.vp_volts"
    assert meta["seeds"] == "0,1"
    assert cols["value"].size == 5
    assert np.all(cols["n_ok"] == 2)
    # de-amplification grows along the sweep
    assert np.all(np.diff(cols["sigma1_ratio"]) < 0)
    # threshold fit footer present and near the configured threshold
    assert "vth_fit_v" in meta
    assert float(meta["vth_fit_v"]) == pytest.approx(0.148, rel=0.2)


def test_simulate_npz_round_trip(tmp_path):
    cfg = _write(tmp_path, "sim.toml", BASE_TOML + """
[drive]
gs = 0.5

[run]
duration_s = 0.5
dt_s = 1e-5
seeds = [3]
""")
    out = str(tmp_path / "trace.npz")
    assert main(["simulate", "--config", cfg, "--out", out]) == 0
    data = np.load(out)
    assert str(data["magic"]) == "SQZTRACE"
    assert int(data["format_version"]) == 1
    assert float(data["dt"]) == 1e-5
    assert int(data["seed"]) == 3
    assert not bool(data["divergent"])

    config = load_config(cfg)
    direct = simulate_rotating(
        config.oscillator, config.bath, 0.5, 0.0, 0.5, 1e-5, seed=3
    )
    assert np.array_equal(data["x1"], direct.x1)
    assert np.array_equal(data["x2"], direct.x2)
    assert int(data["length"]) == direct.x1.size


def test_simulate_csv_stdout(tmp_path, capsys):
    cfg = _write(tmp_path, "sim.toml", BASE_TOML + """
[drive]
gs = 0.1

[run]
duration_s = 0.01
dt_s = 1e-5
seeds = 1
""")
    assert main(["simulate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert "# seed = 0" in lines
    assert "# mode = rotating" in lines
    header_idx = next(i for i, ln in enumerate(lines) if not ln.startswith("#"))
    assert lines[header_idx] == "t_s,x1_m,x2_m"
    assert len(lines) - header_idx - 1 == 1001  # includes the t = 0 sample


def test_seed_override_recorded(tmp_path, capsys):
    cfg = _write(tmp_path, "sim.toml", BASE_TOML + """
[drive]
gs = 0.1

[run]
duration_s = 0.01
dt_s = 1e-5
seeds = 1
""")
    assert main(["simulate", "--config", cfg, "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert "# seed = 9" in out.splitlines()
    # the hash covers the folded override
    base_hash = load_config(cfg).config_hash
    line = next(ln for ln in out.splitlines() if ln.startswith("# config_hash"))
    assert line.split(" = ")[1] != base_hash


def test_seed_override_without_run_section(tmp_path, capsys):
    cfg = _write(tmp_path, "p.toml", BASE_TOML)
    rc = main(["predict", "--config", cfg, "--seed", "1"])
    assert rc == 2


def test_fit_report(tmp_path, capsys):
    freqs = np.arange(1, 801) * 0.25
    hw = 2.0
    vals = 1e-24 + (2.0 / math.pi) * 3e-22 * hw / ((freqs - 100.0) ** 2 + hw**2)
    spec_csv = str(tmp_path / "spec.csv")
    write_rows(spec_csv, ("f_hz", "psd_m2_per_hz"), list(zip(freqs, vals)))
    cfg = _write(tmp_path, "fit.toml", BASE_TOML + f"""
[fit]
input = '{spec_csv}'
""")
    assert main(["fit", "--config", cfg]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["center_hz"] == pytest.approx(100.0, rel=1e-6)
    assert report["gamma_hz"] == pytest.approx(4.0, rel=1e-6)
    assert report["variance_m2"] == pytest.approx(3e-22, rel=1e-6)
    assert report["n_excluded"] == 0


def test_fit_flat_spectrum_exits_3(tmp_path, capsys):
    freqs = np.arange(100) * 1.0
    spec_csv = str(tmp_path / "flat.csv")
    write_rows(spec_csv, ("f_hz", "psd_m2_per_hz"),
               [(f, 2.5e-24) for f in freqs])
    cfg = _write(tmp_path, "fit.toml", BASE_TOML + f"""
[fit]
input = '{spec_csv}'
""")
    rc = main(["fit", "--config", cfg])
    assert rc == 3
    assert "squeezesim:" in capsys.readouterr().err


def test_allan_round_trip(tmp_path, capsys):
    rate, f0, r = 100.0, 1e6, 0.37
    t = np.arange(400) / rate
    freq = f0 + r * t
    rec = str(tmp_path / "freq.csv")
    write_rows(rec, ("freq_hz",), [(f,) for f in freq],
               meta=[("sample_rate_hz", rate)])
    cfg = _write(tmp_path, "allan.toml", BASE_TOML + f"""
[allan]
input = '{rec}'
f0_hz = 1e6
taus_s = [0.05, 0.2, 1.0]
""")
    assert main(["allan", "--config", cfg]) == 0
    out = capsys.readouterr().out
    lines = [ln for ln in out.splitlines() if ln and not ln.startswith("#")]
    assert lines[0] == "tau_s,allan_dev"
    for line in lines[1:]:
        tau, dev = (float(p) for p in line.split(","))
        assert dev == pytest.approx(r * tau / (math.sqrt(2.0) * f0), rel=1e-9)


def test_allan_missing_rate_header(tmp_path, capsys):
    rec = str(tmp_path / "freq.csv")
    write_rows(rec, ("freq_hz",), [(1e6,)] * 50)
    cfg = _write(tmp_path, "allan.toml", BASE_TOML + f"""
[allan]
input = '{rec}'
""")
    assert main(["allan", "--config", cfg]) == 2


def test_purity_map(tmp_path):
    cfg = _write(tmp_path, "map.toml", """
[oscillator]
mass_ng = 0.03
frequency_mhz = 1.0
quality_factor = 1e8

[bath]
temperature_k = 10.0

[readout]
gamma_qba = 0.01
eta_det = 0.77

[map]
kind = "purity"
x = "0:4:3"
y = "0.001:1:3,log"
""")
    out = str(tmp_path / "map.csv")
    assert main(["map", "--config", cfg, "--out", out]) == 0
    meta, cols = _read_mixed_csv(out)
    assert meta["kind"] == "purity"
    assert cols["purity"].size == 9
    ok = np.isfinite(cols["purity"])
    assert np.all(cols["purity"][ok] <= math.sqrt(0.77) + 1e-9)
    assert set(np.unique(cols["contour"])) <= {0.0, 1.0}


def test_grid_override_changes_hash(tmp_path):
    cfg = _write(tmp_path, "map.toml", """
[oscillator]
mass_ng = 0.03
frequency_mhz = 1.0
quality_factor = 1e8

[bath]
temperature_k = 10.0

[readout]
gamma_qba = 0.01

[map]
kind = "snr"
x = "0:4:3"
y = "0.001:1:3,log"
""")
    out1 = str(tmp_path / "a.csv")
    out2 = str(tmp_path / "b.csv")
    assert main(["map", "--config", cfg, "--out", out1]) == 0
    assert main(["map", "--config", cfg, "--out", out2,
                 "--grid", "0:8:5"]) == 0
    meta1, cols1 = _read_mixed_csv(out1)
    meta2, cols2 = _read_mixed_csv(out2)
    assert meta1["config_hash"] != meta2["config_hash"]
    assert cols2["gs"].max() == pytest.approx(8.0)
    assert main(["map", "--config", cfg, "--out", out2,
                 "--grid", "nonsense"]) == 2


def test_squeezing_map(tmp_path):
    cfg = _write(tmp_path, "map.toml", """
[oscillator]
mass_ng = 0.03
frequency_mhz = 1.0
quality_factor = 1e9

[bath]
temperature_k = 300.0

[capacitor]
alpha_pf_nm = 0.012
c0_ff = 16.0
d0_um = 1.0

[map]
kind = "squeezing"
x = "0.5:2:3"
y = "0.1:1:3"
""")
    out = str(tmp_path / "sqmap.csv")
    assert main(["map", "--config", cfg, "--out", out]) == 0
    meta, cols = _read_mixed_csv(out)
    assert cols["squeezing_db"].size == 9
    # squeezing grows with either voltage inside the ok region
    assert np.nanmax(cols["squeezing_db"]) > np.nanmin(cols["squeezing_db"])
