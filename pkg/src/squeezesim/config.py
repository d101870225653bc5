"""Experiment configuration: parsing, validation, unit conversion.

Config files are TOML (or JSON mapping to the same structure).  Keys
carry their unit in the name; convenience units (MHz, mV, ng, um, fF)
are converted to SI at this boundary so everything downstream is plain
SI.  Parsing normalizes each quantity to one canonical key, so
serialize(parse(file)) is a valid config that parses back to an equal
structure, and the canonical form is what gets hashed into output-file
headers.

Unknown keys are rejected with the full field path; so are conflicting
alternates for the same quantity (e.g. mass_ng next to mass_kg).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .capdesign import CapacitorGeometry, PiezoTuning
from .errors import ConfigError
from .model import (
    DriveConfig,
    FeedbackConfig,
    OscillatorParams,
    PllConfig,
    QuantumReadout,
    ThermalBath,
)

# paths a sweep may vary; values are given in the canonical unit
SWEEPABLE = (
    "drive.vp_volts",
    "drive.gs",
    "drive.kp_n_per_m",
    "feedback.gfb",
    "capacitor.vdc_volts",
    "capacitor.vp_volts",
)

MAP_KINDS = ("purity", "snr", "squeezing")
RUN_MODES = ("rotating", "position", "pll")


def _require_number(value, path, positive=False, nonnegative=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "value must be finite")
    if positive and value <= 0:
        raise ConfigError(path, f"value must be > 0, got {value}")
    if nonnegative and value < 0:
        raise ConfigError(path, f"value must be >= 0, got {value}")
    return value


def _require_str(value, path, allowed=None):
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {type(value).__name__}")
    if allowed is not None and value not in allowed:
        raise ConfigError(path, f"must be one of {allowed}, got {value!r}")
    return value


def _require_table(value, path):
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected a table, got {type(value).__name__}")
    return value


def _reject_unknown(table, path, known):
    for key in table:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _pick_unit(table, path, alternates, required=False, **num_kw):
    """Read one quantity offered under several unit keys.

    alternates: {key: scale-to-canonical}; the first key is canonical.
    Returns (canonical_value, canonical_key) or (None, canonical_key).
    """
    present = [k for k in alternates if k in table]
    if len(present) > 1:
        raise ConfigError(
            f"{path}.{present[1]}",
            f"conflicts with {present[0]}; give the quantity once",
        )
    canonical = next(iter(alternates))
    if not present:
        if required:
            raise ConfigError(
                path, f"missing required key (one of {list(alternates)})"
            )
        return None, canonical
    key = present[0]
    raw = _require_number(table[key], f"{path}.{key}", **num_kw)
    return raw * alternates[key], canonical


def _parse_oscillator(table):
    path = "oscillator"
    _reject_unknown(table, path, {
        "mass_kg", "mass_ng",
        "frequency_hz", "frequency_mhz", "omega_rad_per_s",
        "quality_factor", "gamma_hz",
    })
    mass, _ = _pick_unit(
        table, path, {"mass_kg": 1.0, "mass_ng": 1e-12},
        required=True, positive=True,
    )
    freq, _ = _pick_unit(
        table, path,
        {"frequency_hz": 1.0, "frequency_mhz": 1e6,
         "omega_rad_per_s": 1.0 / (2.0 * math.pi)},
        required=True, positive=True,
    )
    omega_m = 2.0 * math.pi * freq
    q_val, _ = _pick_unit(table, path, {"quality_factor": 1.0}, positive=True)
    gamma_hz, _ = _pick_unit(table, path, {"gamma_hz": 1.0}, positive=True)
    if q_val is None and gamma_hz is None:
        raise ConfigError(path, "give quality_factor or gamma_hz")
    if q_val is not None and gamma_hz is not None:
        raise ConfigError(f"{path}.gamma_hz", "conflicts with quality_factor")
    if q_val is None:
        q_val = freq / gamma_hz
    osc = OscillatorParams.from_q(mass=mass, omega_m=omega_m, q=q_val)
    canonical = {
        "mass_kg": mass,
        "frequency_hz": freq,
        "quality_factor": q_val,
    }
    return osc, canonical


def _parse_bath(table):
    path = "bath"
    _reject_unknown(table, path, {"temperature_k"})
    temp, _ = _pick_unit(
        table, path, {"temperature_k": 1.0}, required=True, nonnegative=True
    )
    return ThermalBath(temperature=temp), {"temperature_k": temp}


_PHASE_BY_DEG = {0.0: 0.0, 90.0: math.pi / 2.0, -90.0: -math.pi / 2.0}


def _parse_drive(table):
    path = "drive"
    _reject_unknown(table, path, {
        "gs", "kp_n_per_m", "vp_volts", "vp_mv", "vth_volts", "vth_mv",
        "f0_n", "phase_deg",
    })
    gs, _ = _pick_unit(table, path, {"gs": 1.0}, nonnegative=True)
    kp, _ = _pick_unit(table, path, {"kp_n_per_m": 1.0}, nonnegative=True)
    vp, _ = _pick_unit(
        table, path, {"vp_volts": 1.0, "vp_mv": 1e-3}, nonnegative=True
    )
    vth, _ = _pick_unit(
        table, path, {"vth_volts": 1.0, "vth_mv": 1e-3}, positive=True
    )
    f0, _ = _pick_unit(table, path, {"f0_n": 1.0}, nonnegative=True)
    phase_deg, _ = _pick_unit(table, path, {"phase_deg": 1.0})
    if phase_deg is None:
        phase_deg = 0.0
    if phase_deg not in _PHASE_BY_DEG:
        raise ConfigError(f"{path}.phase_deg", "must be one of 0, 90, -90")
    if vp is not None and vth is not None:
        gs_v = vp / vth
        if gs is not None and not math.isclose(gs, gs_v, rel_tol=1e-9):
            raise ConfigError(
                f"{path}.gs",
                f"inconsistent with vp/vth = {gs_v:.6g}",
            )
        if gs is None:
            gs = gs_v
    drive = DriveConfig(
        f0=f0 if f0 is not None else 0.0,
        phi_p=_PHASE_BY_DEG[phase_deg],
        gs=gs,
        kp=kp,
    )
    canonical = {"phase_deg": phase_deg}
    if gs is not None:
        canonical["gs"] = gs
    if kp is not None:
        canonical["kp_n_per_m"] = kp
    if vp is not None:
        canonical["vp_volts"] = vp
    if vth is not None:
        canonical["vth_volts"] = vth
    if f0 is not None:
        canonical["f0_n"] = f0
    return drive, vp, vth, canonical


def _parse_feedback(table):
    path = "feedback"
    _reject_unknown(table, path, {"gfb", "pll"})
    gfb, _ = _pick_unit(table, path, {"gfb": 1.0}, nonnegative=True)
    if gfb is None:
        gfb = 0.0
    canonical = {"gfb": gfb}
    pll = None
    if "pll" in table:
        sub = _require_table(table["pll"], f"{path}.pll")
        _reject_unknown(sub, f"{path}.pll", {
            "proportional_hz_per_rad", "integral_hz_per_rad_s", "bandwidth_hz",
        })
        prop, _ = _pick_unit(
            sub, f"{path}.pll", {"proportional_hz_per_rad": 1.0},
            required=True, positive=True,
        )
        integ, _ = _pick_unit(
            sub, f"{path}.pll", {"integral_hz_per_rad_s": 1.0}, nonnegative=True
        )
        bw, _ = _pick_unit(
            sub, f"{path}.pll", {"bandwidth_hz": 1.0}, positive=True
        )
        pll = PllConfig(
            proportional=prop,
            integral=integ if integ is not None else 0.0,
            bandwidth=bw,
        )
        canonical["pll"] = {
            "proportional_hz_per_rad": prop,
            "integral_hz_per_rad_s": pll.integral,
        }
        if bw is not None:
            canonical["pll"]["bandwidth_hz"] = bw
    return FeedbackConfig(gfb=gfb, pll=pll), canonical


def _parse_readout(table):
    path = "readout"
    _reject_unknown(table, path, {"gamma_qba", "eta_det"})
    gamma_qba, _ = _pick_unit(
        table, path, {"gamma_qba": 1.0}, required=True, nonnegative=True
    )
    eta, _ = _pick_unit(table, path, {"eta_det": 1.0}, positive=True)
    if eta is None:
        eta = 1.0
    if eta > 1.0:
        raise ConfigError(f"{path}.eta_det", f"must be <= 1, got {eta}")
    readout = QuantumReadout(gamma_qba=gamma_qba, eta_det=eta)
    return readout, {"gamma_qba": gamma_qba, "eta_det": eta}


def _parse_capacitor(table):
    path = "capacitor"
    _reject_unknown(table, path, {
        "alpha_f_m", "alpha_pf_nm", "c0_f", "c0_ff", "d0_m", "d0_um",
        "vdc_volts", "vdc_mv", "vp_volts", "vp_mv",
    })
    alpha, _ = _pick_unit(
        table, path, {"alpha_f_m": 1.0, "alpha_pf_nm": 1e-21},
        required=True, positive=True,
    )
    c0, _ = _pick_unit(
        table, path, {"c0_f": 1.0, "c0_ff": 1e-15}, nonnegative=True
    )
    d0, _ = _pick_unit(
        table, path, {"d0_m": 1.0, "d0_um": 1e-6}, required=True, positive=True
    )
    vdc, _ = _pick_unit(
        table, path, {"vdc_volts": 1.0, "vdc_mv": 1e-3}, nonnegative=True
    )
    vp, _ = _pick_unit(
        table, path, {"vp_volts": 1.0, "vp_mv": 1e-3}, nonnegative=True
    )
    geom = CapacitorGeometry(
        alpha=alpha,
        c0=c0 if c0 is not None else 0.0,
        d0=d0,
        vdc=vdc if vdc is not None else 0.0,
        vp=vp if vp is not None else 0.0,
    )
    canonical = {
        "alpha_f_m": alpha,
        "c0_f": geom.c0,
        "d0_m": d0,
        "vdc_volts": geom.vdc,
        "vp_volts": geom.vp,
    }
    return geom, canonical


def _parse_piezo(table):
    path = "piezo"
    _reject_unknown(table, path, {"slope_hz_per_v"})
    slope, _ = _pick_unit(
        table, path, {"slope_hz_per_v": 1.0}, required=True
    )
    return PiezoTuning(slope_hz_per_volt=slope), {"slope_hz_per_v": slope}


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    model: str = "variance"


def _parse_sweep(table):
    path = "sweep"
    _reject_unknown(table, path, {"variable", "values", "model"})
    variable = _require_str(table.get("variable"), f"{path}.variable",
                            allowed=SWEEPABLE) if "variable" in table else None
    if variable is None:
        raise ConfigError(path, "missing required key variable")
    if "values" not in table:
        raise ConfigError(path, "missing required key values")
    raw = table["values"]
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}.values", "expected a non-empty list of numbers")
    values = tuple(
        _require_number(v, f"{path}.values[{i}]", nonnegative=True)
        for i, v in enumerate(raw)
    )
    model = "variance"
    if "model" in table:
        model = _require_str(
            table["model"], f"{path}.model",
            allowed=("variance", "gain_deamp", "gain_amp"),
        )
    spec = SweepSpec(variable=variable, values=values, model=model)
    canonical = {"variable": variable, "values": list(values), "model": model}
    return spec, canonical


@dataclass(frozen=True)
class RunSpec:
    duration: float
    dt: float
    seeds: tuple
    mode: str = "rotating"
    discard: float | None = None
    segment_length: int = 4096
    overlap_fraction: float = 0.5
    exclude_halfwidth_hz: float | None = None
    demod_bandwidth_hz: float | None = None
    control_rate_hz: float | None = None
    output_rate_hz: float | None = None
    lock_fraction: float = 0.5


def _parse_seeds(raw, path):
    if isinstance(raw, bool):
        raise ConfigError(path, "expected an integer count or list of integers")
    if isinstance(raw, int):
        if raw <= 0:
            raise ConfigError(path, f"seed count must be > 0, got {raw}")
        return tuple(range(raw))
    if isinstance(raw, list):
        if not raw:
            raise ConfigError(path, "seed list must not be empty")
        seeds = []
        for i, s in enumerate(raw):
            if isinstance(s, bool) or not isinstance(s, int):
                raise ConfigError(f"{path}[{i}]", "seeds must be integers")
            if s < 0:
                raise ConfigError(f"{path}[{i}]", "seeds must be >= 0")
            seeds.append(s)
        return tuple(seeds)
    raise ConfigError(path, "expected an integer count or list of integers")


def _parse_run(table):
    path = "run"
    _reject_unknown(table, path, {
        "duration_s", "dt_s", "seeds", "mode", "discard_s",
        "segment_length", "overlap_fraction", "exclude_halfwidth_hz",
        "demod_bandwidth_hz", "control_rate_hz", "output_rate_hz",
        "lock_fraction",
    })
    duration, _ = _pick_unit(
        table, path, {"duration_s": 1.0}, required=True, positive=True
    )
    dt, _ = _pick_unit(table, path, {"dt_s": 1.0}, required=True, positive=True)
    if "seeds" not in table:
        raise ConfigError(path, "missing required key seeds")
    seeds = _parse_seeds(table["seeds"], f"{path}.seeds")
    mode = "rotating"
    if "mode" in table:
        mode = _require_str(table["mode"], f"{path}.mode", allowed=RUN_MODES)
    discard, _ = _pick_unit(table, path, {"discard_s": 1.0}, nonnegative=True)
    seg = 4096
    if "segment_length" in table:
        raw = table["segment_length"]
        if isinstance(raw, bool) or not isinstance(raw, int) or raw < 4:
            raise ConfigError(f"{path}.segment_length",
                              "expected an integer >= 4")
        seg = raw
    overlap, _ = _pick_unit(
        table, path, {"overlap_fraction": 1.0}, nonnegative=True
    )
    if overlap is None:
        overlap = 0.5
    if overlap >= 1.0:
        raise ConfigError(f"{path}.overlap_fraction", "must be < 1")
    excl, _ = _pick_unit(
        table, path, {"exclude_halfwidth_hz": 1.0}, nonnegative=True
    )
    demod_bw, _ = _pick_unit(
        table, path, {"demod_bandwidth_hz": 1.0}, positive=True
    )
    control, _ = _pick_unit(
        table, path, {"control_rate_hz": 1.0}, positive=True
    )
    out_rate, _ = _pick_unit(
        table, path, {"output_rate_hz": 1.0}, positive=True
    )
    lock_fraction, _ = _pick_unit(
        table, path, {"lock_fraction": 1.0}, positive=True
    )
    if lock_fraction is None:
        lock_fraction = 0.5
    spec = RunSpec(
        duration=duration, dt=dt, seeds=seeds, mode=mode, discard=discard,
        segment_length=seg, overlap_fraction=overlap,
        exclude_halfwidth_hz=excl, demod_bandwidth_hz=demod_bw,
        control_rate_hz=control, output_rate_hz=out_rate,
        lock_fraction=lock_fraction,
    )
    canonical = {
        "duration_s": duration, "dt_s": dt, "seeds": list(seeds),
        "mode": mode, "segment_length": seg, "overlap_fraction": overlap,
        "lock_fraction": lock_fraction,
    }
    for key, val in (
        ("discard_s", discard), ("exclude_halfwidth_hz", excl),
        ("demod_bandwidth_hz", demod_bw), ("control_rate_hz", control),
        ("output_rate_hz", out_rate),
    ):
        if val is not None:
            canonical[key] = val
    return spec, canonical


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    n: int
    log: bool = False

    def values(self):
        if self.log:
            return np.logspace(
                math.log10(self.start), math.log10(self.stop), self.n
            )
        return np.linspace(self.start, self.stop, self.n)


def parse_grid(text, path="grid"):
    """Parse 'start:stop:n' or 'start:stop:n,log' into a GridSpec."""
    if not isinstance(text, str):
        raise ConfigError(path, "expected a grid string 'start:stop:n[,log]'")
    body, log = text, False
    if "," in text:
        body, flag = text.split(",", 1)
        if flag.strip() not in ("log", "lin"):
            raise ConfigError(path, f"unknown spacing flag {flag.strip()!r}")
        log = flag.strip() == "log"
    parts = body.split(":")
    if len(parts) != 3:
        raise ConfigError(path, "expected 'start:stop:n[,log]'")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(path, f"bad grid component: {exc}") from None
    if n < 2:
        raise ConfigError(path, "grid needs at least 2 points")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError(path, "grid bounds must be finite")
    if log and (start <= 0 or stop <= 0):
        raise ConfigError(path, "log grid bounds must be positive")
    return GridSpec(start=start, stop=stop, n=n, log=log)


def _grid_text(spec: GridSpec):
    base = f"{spec.start:g}:{spec.stop:g}:{spec.n}"
    return base + (",log" if spec.log else "")


@dataclass(frozen=True)
class MapSpec:
    kind: str
    x: GridSpec
    y: GridSpec


def _parse_map(table):
    path = "map"
    _reject_unknown(table, path, {"kind", "x", "y"})
    if "kind" not in table:
        raise ConfigError(path, "missing required key kind")
    kind = _require_str(table["kind"], f"{path}.kind", allowed=MAP_KINDS)
    if "x" not in table or "y" not in table:
        raise ConfigError(path, "map needs both x and y grid strings")
    x = parse_grid(table["x"], f"{path}.x")
    y = parse_grid(table["y"], f"{path}.y")
    spec = MapSpec(kind=kind, x=x, y=y)
    canonical = {"kind": kind, "x": _grid_text(x), "y": _grid_text(y)}
    return spec, canonical


@dataclass(frozen=True)
class AllanSpec:
    input: str
    f0_hz: float | None = None
    taus_s: tuple | None = None


def _parse_allan(table):
    path = "allan"
    _reject_unknown(table, path, {"input", "f0_hz", "taus_s"})
    if "input" not in table:
        raise ConfigError(path, "missing required key input")
    inp = _require_str(table["input"], f"{path}.input")
    f0, _ = _pick_unit(table, path, {"f0_hz": 1.0}, positive=True)
    taus = None
    if "taus_s" in table:
        raw = table["taus_s"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{path}.taus_s", "expected a non-empty list")
        taus = tuple(
            _require_number(v, f"{path}.taus_s[{i}]", positive=True)
            for i, v in enumerate(raw)
        )
    spec = AllanSpec(input=inp, f0_hz=f0, taus_s=taus)
    canonical = {"input": inp}
    if f0 is not None:
        canonical["f0_hz"] = f0
    if taus is not None:
        canonical["taus_s"] = list(taus)
    return spec, canonical


@dataclass(frozen=True)
class FitSpec:
    input: str
    exclude_halfwidth_hz: float = 0.0


def _parse_fit(table):
    path = "fit"
    _reject_unknown(table, path, {"input", "exclude_halfwidth_hz"})
    if "input" not in table:
        raise ConfigError(path, "missing required key input")
    inp = _require_str(table["input"], f"{path}.input")
    excl, _ = _pick_unit(
        table, path, {"exclude_halfwidth_hz": 1.0}, nonnegative=True
    )
    if excl is None:
        excl = 0.0
    spec = FitSpec(input=inp, exclude_halfwidth_hz=excl)
    return spec, {"input": inp, "exclude_halfwidth_hz": excl}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with all quantities in SI.

    `data` is the canonical normalized structure (plain dicts/lists);
    it is what serialize() emits and what the config hash covers.
    """

    oscillator: OscillatorParams
    bath: ThermalBath
    drive: DriveConfig
    feedback: FeedbackConfig
    readout: QuantumReadout | None
    capacitor: CapacitorGeometry | None
    piezo: PiezoTuning | None
    sweep: SweepSpec | None
    run: RunSpec | None
    map: MapSpec | None
    allan: AllanSpec | None
    fit: FitSpec | None
    vp_volts: float | None
    vth_volts: float | None
    data: dict

    @property
    def config_hash(self):
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_SECTIONS = (
    "oscillator", "bath", "drive", "feedback", "readout",
    "capacitor", "piezo", "sweep", "run", "map", "allan", "fit",
)


def config_from_dict(mapping):
    """Validate and normalize a raw config mapping."""
    table = _require_table(mapping, "")
    _reject_unknown(table, "", set(_SECTIONS))
    for name in ("oscillator", "bath"):
        if name not in table:
            raise ConfigError(name, "missing required section")

    data = {}
    osc, data["oscillator"] = _parse_oscillator(
        _require_table(table["oscillator"], "oscillator")
    )
    bath, data["bath"] = _parse_bath(_require_table(table["bath"], "bath"))

    drive, vp, vth = DriveConfig(), None, None
    if "drive" in table:
        drive, vp, vth, canon = _parse_drive(
            _require_table(table["drive"], "drive")
        )
        data["drive"] = canon
    feedback = FeedbackConfig()
    if "feedback" in table:
        feedback, data["feedback"] = _parse_feedback(
            _require_table(table["feedback"], "feedback")
        )
    readout = None
    if "readout" in table:
        readout, data["readout"] = _parse_readout(
            _require_table(table["readout"], "readout")
        )
    capacitor = None
    if "capacitor" in table:
        capacitor, data["capacitor"] = _parse_capacitor(
            _require_table(table["capacitor"], "capacitor")
        )
    piezo = None
    if "piezo" in table:
        piezo, data["piezo"] = _parse_piezo(
            _require_table(table["piezo"], "piezo")
        )
    sweep = None
    if "sweep" in table:
        sweep, data["sweep"] = _parse_sweep(
            _require_table(table["sweep"], "sweep")
        )
    run = None
    if "run" in table:
        run, data["run"] = _parse_run(_require_table(table["run"], "run"))
    map_spec = None
    if "map" in table:
        map_spec, data["map"] = _parse_map(_require_table(table["map"], "map"))
    allan = None
    if "allan" in table:
        allan, data["allan"] = _parse_allan(
            _require_table(table["allan"], "allan")
        )
    fit = None
    if "fit" in table:
        fit, data["fit"] = _parse_fit(_require_table(table["fit"], "fit"))

    if sweep is not None:
        section = sweep.variable.split(".", 1)[0]
        if section == "capacitor" and capacitor is None:
            raise ConfigError(
                "sweep.variable", "references [capacitor], which is absent"
            )
    return ExperimentConfig(
        oscillator=osc, bath=bath, drive=drive, feedback=feedback,
        readout=readout, capacitor=capacitor, piezo=piezo, sweep=sweep,
        run=run, map=map_spec, allan=allan, fit=fit,
        vp_volts=vp, vth_volts=vth, data=data,
    )


def load_config(path):
    """Load a TOML or JSON config file (format chosen by extension,
    with a TOML-then-JSON fallback for other extensions)."""
    p = Path(path)
    try:
        raw_bytes = p.read_bytes()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    suffix = p.suffix.lower()
    if suffix == ".json":
        try:
            mapping = json.loads(raw_bytes.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    elif suffix == ".toml":
        try:
            mapping = tomllib.loads(raw_bytes.decode())
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    else:
        try:
            mapping = tomllib.loads(raw_bytes.decode())
        except Exception:
            try:
                mapping = json.loads(raw_bytes.decode())
            except Exception as exc:
                raise ConfigError(
                    str(path), f"file is neither valid TOML nor JSON: {exc}"
                ) from exc
    return config_from_dict(mapping)


def serialize_config(config: ExperimentConfig):
    """Canonical JSON text of the normalized config; parses back to an
    equal structure (round-trip invariant)."""
    return json.dumps(config.data, sort_keys=True, indent=2) + "\n"


def loads_config(text):
    """Parse config text (JSON or TOML) without a file."""
    try:
        mapping = json.loads(text)
    except json.JSONDecodeError:
        try:
            mapping = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<text>", f"neither valid JSON nor TOML: {exc}") from exc
    return config_from_dict(mapping)
