"""Experiment orchestration: the engines behind the command-line tools.

Each pipeline is a pure function of an ExperimentConfig (plus explicit
seed overrides), so identical configs produce byte-identical output
files.  Sweep and map cells run in a thread pool sized by the
SQUEEZESIM_THREADS environment variable; results are assembled in grid
order regardless of completion order, and every cell owns a distinct
RNG stream, so parallelism never changes the numbers.
"""

from __future__ import annotations

import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analytic, capdesign, simulate, spectral
from .config import ExperimentConfig
from .errors import ConfigError, InstabilityError, SqueezesimError
from .model import QuantumReadout, resolve_gs
from .version import VERSION


def thread_pool_size():
    """Worker count for sweep/map cells; SQUEEZESIM_THREADS caps it."""
    raw = os.environ.get("SQUEEZESIM_THREADS", "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(
                "SQUEEZESIM_THREADS", f"expected an integer, got {raw!r}"
            ) from None
        if n < 1:
            raise ConfigError("SQUEEZESIM_THREADS", "must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


def _pool_map(fun, items):
    """Map preserving item order; serial when one worker suffices."""
    items = list(items)
    workers = min(thread_pool_size(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fun(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fun, items))


# ---------------------------------------------------------------- CSV I/O

def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_rows(target, columns, rows, meta=(), footer=()):
    """Write a commented CSV: `# key = value` header lines, one column
    row, data rows, optional `# key = value` footer lines.

    No timestamps or environment details go into the file, so identical
    inputs give byte-identical outputs.
    """
    buf = io.StringIO()
    buf.write(f"# squeezesim {VERSION}\n")
    for key, value in meta:
        buf.write(f"# {key} = {_fmt(value)}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    for key, value in footer:
        buf.write(f"# {key} = {_fmt(value)}\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)
    return text


def read_csv_columns(path):
    """Read a commented CSV back: (meta dict, {column: ndarray}).

    Raises ConfigError with the offending line number on malformed
    input.
    """
    meta = {}
    header = None
    data = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read input: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
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
            header = [c.strip() for c in line.split(",")]
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ConfigError(
                f"{path}:{lineno}",
                f"expected {len(header)} columns, got {len(parts)}",
            )
        try:
            data.append([float(p) for p in parts])
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}", f"non-numeric value in data row: {line!r}"
            ) from None
    if header is None:
        raise ConfigError(str(path), "no column header found")
    arr = np.asarray(data, dtype=float).reshape(len(data), len(header))
    return meta, {name: arr[:, i] for i, name in enumerate(header)}


def _seed_meta(seeds):
    return ",".join(str(s) for s in seeds)


# ------------------------------------------------------------- resolution

def resolved_gs(config: ExperimentConfig):
    """Pump strength from whichever route the config supplies.

    Priority: explicit drive gs/kp (checked for consistency), then pump
    voltage against the capacitor geometry's threshold.
    """
    if config.drive.gs is not None or config.drive.kp is not None:
        return resolve_gs(config.drive, config.oscillator)
    if config.capacitor is not None and config.capacitor.vp > 0:
        vth = capdesign.threshold_voltage(config.oscillator, config.capacitor)
        return config.capacitor.vp / vth
    return 0.0


def effective_gfb(config: ExperimentConfig):
    """Feedback gain: explicit gfb, else the value the configured PLL's
    proportional gain calibrates to, else 0."""
    if config.feedback.gfb > 0:
        return config.feedback.gfb
    if config.feedback.pll is not None:
        return simulate.pll_effective_gfb(config.feedback.pll, config.oscillator)
    return 0.0


def settling_discard(config: ExperimentConfig, gs, gfb):
    """Seconds dropped before statistics: configured value, else ten
    time constants of the slowest quadrature."""
    if config.run is not None and config.run.discard is not None:
        return config.run.discard
    gamma1, gamma2 = analytic.quadrature_rates(config.oscillator, gs, gfb)
    slowest = min(gamma1, abs(gamma2)) if gamma2 != 0 else gamma1
    if slowest <= 0:
        return 0.0
    return 10.0 / slowest


# ---------------------------------------------------------------- predict

def predict_report(config: ExperimentConfig):
    """Closed-form predictions for the configured operating point."""
    osc, bath = config.oscillator, config.bath
    gs = resolved_gs(config)
    gfb = effective_gfb(config)
    sigma0_sq = bath.sigma0_sq(osc)
    report = {
        "gs": gs,
        "gfb": gfb,
        "gamma_m_hz": osc.gamma_m / (2.0 * math.pi),
        "sigma0_sq_m2": sigma0_sq,
    }
    try:
        var = analytic.classical_variances(gs, gfb, sigma0_sq)
        db1, db2 = var.db10(sigma0_sq)
        report.update({
            "stable": True,
            "sigma1_sq_m2": var.sigma1_sq,
            "sigma2_sq_m2": var.sigma2_sq,
            "sigma1_ratio": var.sigma1_sq / sigma0_sq,
            "sigma2_ratio": var.sigma2_sq / sigma0_sq,
            "sigma1_db10": db1,
            "sigma2_db10": db2,
            "sigma1_db20": 2.0 * db1,
            "sigma2_db20": 2.0 * db2,
        })
    except InstabilityError:
        report["stable"] = False
    if config.readout is not None:
        nbar = bath.occupancy(osc)
        x_zpf_sq = osc.x_zpf**2
        readout = config.readout
        report.update({
            "nbar": nbar,
            "x_zpf_m": osc.x_zpf,
            "required_squeezing_db10": 10.0 * math.log10(2.0 * nbar + 1.0),
            "snr": analytic.detection_snr(gs, nbar, readout),
        })
        if readout.g_meas > 0:
            gfb_opt = analytic.optimal_feedback_gain(gs, nbar, readout)
            qv = analytic.quantum_variances(gs, gfb_opt, nbar, readout, x_zpf_sq)
            report.update({
                "gfb_opt": gfb_opt,
                "sigma1_sq_quantum_m2": qv.sigma1_sq,
                "sigma2_sq_quantum_m2": qv.sigma2_sq,
                "sigma1_zpf_ratio": qv.sigma1_sq / x_zpf_sq,
                "sigma2_zpf_ratio": qv.sigma2_sq / x_zpf_sq,
                "purity_opt": analytic.purity(qv, x_zpf_sq),
            })
    return report


def format_report(report):
    lines = [f"{key} = {_fmt(value)}" for key, value in report.items()]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ sweep

def fit_zero_centered_peak(spec: spectral.Spectrum, exclude_halfwidth_hz=None,
                           detrended=True):
    """Lorentzian fit of a quadrature spectrum peaked at 0 Hz.

    The one-sided density is extended symmetrically to negative
    frequencies before fitting: a half-peak leaves the center
    ill-constrained and biases the area, while on the symmetric curve
    the area parameter is exactly the trace variance.  When the PSD was
    taken with per-segment mean removal the bins nearest DC are dented
    by it, so 2.5 bin widths are excluded (more if the config says so);
    an estimate without detrending keeps every bin.
    """
    f = spec.frequencies
    v = spec.values
    freqs = np.concatenate([-f[:0:-1], f])
    values = np.concatenate([v[:0:-1], v])
    exclude = 2.5 * spec.df if detrended else 0.0
    if exclude_halfwidth_hz is not None:
        exclude = max(exclude, exclude_halfwidth_hz)
    return spectral.lorentzian_fit(
        freqs=freqs, values=values, exclude_halfwidth=exclude
    )


@dataclass
class SweepCell:
    value: float
    gs: float
    gfb: float
    sigma1_sq: float
    sigma1_se: float
    ratio: float
    ratio_db10: float
    gamma1_hz: float
    gamma1_se_hz: float
    n_ok: int
    flag: str


@dataclass
class SweepResult:
    variable: str
    model: str
    sigma0_sq: float
    seeds: tuple
    cells: list
    threshold: spectral.ThresholdFit | None


def _cell_rates(config: ExperimentConfig, variable, value):
    """(gs, gfb) at one sweep point."""
    osc = config.oscillator
    gfb = effective_gfb(config)
    if variable == "feedback.gfb":
        return resolved_gs(config), value
    if variable == "drive.gs":
        return value, gfb
    if variable == "drive.kp_n_per_m":
        return value * osc.q / (2.0 * osc.k_m), gfb
    if variable == "drive.vp_volts":
        vth = config.vth_volts
        if vth is None and config.capacitor is not None:
            vth = capdesign.threshold_voltage(osc, config.capacitor)
        if vth is None:
            raise ConfigError(
                "drive.vth_volts",
                "sweeping drive.vp_volts needs a threshold (vth_volts or "
                "a [capacitor] section)",
            )
        return value / vth, gfb
    if variable == "capacitor.vp_volts":
        if config.capacitor is None:
            raise ConfigError("capacitor", "section required for this sweep")
        vth = capdesign.threshold_voltage(osc, config.capacitor)
        return value / vth, gfb
    if variable == "capacitor.vdc_volts":
        if config.capacitor is None:
            raise ConfigError("capacitor", "section required for this sweep")
        geom = capdesign.CapacitorGeometry(
            alpha=config.capacitor.alpha, c0=config.capacitor.c0,
            d0=config.capacitor.d0, vdc=value, vp=config.capacitor.vp,
        )
        if value == 0.0:
            return 0.0, gfb
        vth = capdesign.threshold_voltage(osc, geom)
        return geom.vp / vth, gfb
    raise ConfigError("sweep.variable", f"unsupported variable {variable!r}")


def _sweep_cell(config: ExperimentConfig, value_idx, value, seeds):
    """Simulate, estimate, and fit one sweep point over all seeds."""
    run = config.run
    osc, bath = config.oscillator, config.bath
    flag = "ok"
    try:
        gs, gfb = _cell_rates(config, config.sweep.variable, value)
    except SqueezesimError as exc:
        nan = float("nan")
        return SweepCell(value, nan, nan, nan, nan, nan, nan, nan, nan, 0,
                         type(exc).__name__)
    variances, gammas = [], []
    for seed_idx, seed in enumerate(seeds):
        try:
            trace = simulate.simulate_rotating(
                osc, bath, gs, gfb, run.duration, run.dt, seed,
                readout=config.readout,
                stream_offset=value_idx * len(seeds) + seed_idx,
            )
            if trace.divergent:
                raise InstabilityError(
                    "trace diverged before the end of the run"
                )
            x1, _ = trace.steady(settling_discard(config, gs, gfb))
            # Rotating-frame traces are zero mean by construction, so
            # skip detrending and keep the bins nearest DC in the fit.
            spec = spectral.welch_psd(
                x1, run.dt, run.segment_length, run.overlap_fraction,
                detrend=False,
            )
            fit = fit_zero_centered_peak(
                spec, run.exclude_halfwidth_hz, detrended=False
            )
            variances.append(spectral.variance_from_fit(fit))
            gammas.append(fit.gamma)
        except SqueezesimError as exc:
            flag = type(exc).__name__
    n_ok = len(variances)
    if n_ok == 0:
        nan = float("nan")
        return SweepCell(value, gs, gfb, nan, nan, nan, nan, nan, nan, 0, flag)
    v = np.asarray(variances)
    g = np.asarray(gammas)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else float("nan")
    g_mean = float(g.mean())
    g_se = float(g.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else float("nan")
    sigma0_sq = bath.sigma0_sq(osc)
    ratio = mean / sigma0_sq
    return SweepCell(
        value=value, gs=gs, gfb=gfb, sigma1_sq=mean, sigma1_se=se,
        ratio=ratio, ratio_db10=10.0 * math.log10(ratio) if ratio > 0 else
        float("nan"), gamma1_hz=g_mean, gamma1_se_hz=g_se,
        n_ok=n_ok, flag=flag,
    )


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """simulate -> PSD -> Lorentzian fit -> variance for every sweep
    point, then a threshold fit over the surviving points."""
    if config.sweep is None:
        raise ConfigError("sweep", "missing section")
    if config.run is None:
        raise ConfigError("run", "missing section")
    seeds = config.run.seeds
    if not seeds:
        raise ConfigError("run.seeds", "seed list must not be empty")
    sweep = config.sweep

    cells = _pool_map(
        lambda iv: _sweep_cell(config, iv[0], iv[1], seeds),
        enumerate(sweep.values),
    )
    sigma0_sq = config.bath.sigma0_sq(config.oscillator)
    threshold = None
    usable = [c for c in cells if c.n_ok > 0 and math.isfinite(c.ratio)]
    if sweep.variable != "feedback.gfb" and len(usable) >= 5:
        try:
            threshold = spectral.fit_threshold(
                [c.value for c in usable],
                [c.ratio for c in usable],
                model=sweep.model,
            )
        except SqueezesimError:
            threshold = None
    return SweepResult(
        variable=sweep.variable, model=sweep.model, sigma0_sq=sigma0_sq,
        seeds=seeds, cells=cells, threshold=threshold,
    )


SWEEP_COLUMNS = (
    "value", "gs", "gfb", "sigma1_sq_m2", "sigma1_se_m2", "sigma1_ratio",
    "sigma1_ratio_db10", "gamma1_fit_hz", "gamma1_fit_se_hz", "n_ok", "flag",
)


def sweep_rows(result: SweepResult):
    rows = [
        (c.value, c.gs, c.gfb, c.sigma1_sq, c.sigma1_se, c.ratio,
         c.ratio_db10, c.gamma1_hz, c.gamma1_se_hz, c.n_ok, c.flag)
        for c in result.cells
    ]
    footer = []
    if result.threshold is not None:
        footer = [
            ("vth_fit_v", result.threshold.vth),
            ("vth_fit_sigma_v", result.threshold.vth_sigma),
            ("vth_model", result.threshold.model),
        ]
        if result.threshold.model != "variance":
            footer.append(("scale_fit", result.threshold.scale))
    return SWEEP_COLUMNS, rows, footer


# -------------------------------------------------------------------- map

@dataclass
class MapResult:
    kind: str
    columns: tuple
    rows: list
    meta: list


def _contour_marks(grid, level):
    """Cells where grid - level changes sign against the next cell in
    either direction; NaN cells never mark."""
    diff = grid - level
    marks = np.zeros(grid.shape, dtype=bool)
    with np.errstate(invalid="ignore"):
        horiz = diff[:, :-1] * diff[:, 1:] <= 0
        vert = diff[:-1, :] * diff[1:, :] <= 0
    ok = np.isfinite(diff)
    marks[:, :-1] |= horiz & ok[:, :-1] & ok[:, 1:]
    marks[:-1, :] |= vert & ok[:-1, :] & ok[1:, :]
    return marks


def run_map(config: ExperimentConfig) -> MapResult:
    """Analytic maps (purity/snr over pump strength and backaction) or
    the capacitive squeezing map over (V_DC, V_p)."""
    if config.map is None:
        raise ConfigError("map", "missing section")
    kind = config.map.kind
    xs = config.map.x.values()
    ys = config.map.y.values()

    if kind == "squeezing":
        if config.capacitor is None:
            raise ConfigError("capacitor", "squeezing map needs this section")
        res = capdesign.squeezing_map(
            config.oscillator, config.capacitor, xs, ys
        )
        marks = _contour_marks(res.squeezing_db, 56.0)
        rows = []
        for i, vdc in enumerate(xs):
            for j, vp in enumerate(ys):
                rows.append((
                    vdc, vp, res.x_eq[i, j], res.gs[i, j],
                    res.squeezing_db[i, j], res.flags[i, j],
                    int(marks[i, j]),
                ))
        return MapResult(
            kind=kind,
            columns=("vdc_volts", "vp_volts", "xeq_m", "gs", "squeezing_db",
                     "flag", "contour"),
            rows=rows,
            meta=[("kind", kind), ("contour_level", "squeezing_db = 56")],
        )

    if config.readout is None:
        raise ConfigError("readout", f"{kind} map needs this section")
    osc, bath = config.oscillator, config.bath
    nbar = bath.occupancy(osc)
    x_zpf_sq = osc.x_zpf**2
    eta = config.readout.eta_det

    value = np.full((xs.size, ys.size), np.nan)
    aux = np.full((xs.size, ys.size), np.nan)

    def fill(i):
        gs = xs[i]
        for j, gamma_qba in enumerate(ys):
            readout = QuantumReadout(gamma_qba=gamma_qba, eta_det=eta)
            if kind == "snr":
                value[i, j] = analytic.detection_snr(gs, nbar, readout)
            else:
                gfb_opt = analytic.optimal_feedback_gain(gs, nbar, readout)
                qv = analytic.quantum_variances(
                    gs, gfb_opt, nbar, readout, x_zpf_sq
                )
                value[i, j] = analytic.purity(qv, x_zpf_sq)
                aux[i, j] = qv.sigma1_sq / x_zpf_sq

    _pool_map(fill, range(xs.size))
    if kind == "snr":
        marks = _contour_marks(value, 1.0)
        level = "snr = 1"
    else:
        marks = _contour_marks(aux, 1.0)
        level = "sigma1_sq = x_zpf_sq"
    name = {"snr": "snr", "purity": "purity"}[kind]
    rows = []
    for i in range(xs.size):
        for j in range(ys.size):
            rows.append((xs[i], ys[j], value[i, j], "ok", int(marks[i, j])))
    return MapResult(
        kind=kind,
        columns=("gs", "gamma_qba", name, "flag", "contour"),
        rows=rows,
        meta=[("kind", kind), ("nbar", nbar), ("eta_det", eta),
              ("contour_level", level)],
    )


# --------------------------------------------------------------- simulate

def run_simulation(config: ExperimentConfig, seed):
    """One trace in the configured mode (rotating | position | pll)."""
    if config.run is None:
        raise ConfigError("run", "missing section")
    run = config.run
    osc, bath = config.oscillator, config.bath
    mode = run.mode
    if mode == "rotating":
        return simulate.simulate_rotating(
            osc, bath, resolved_gs(config), effective_gfb(config),
            run.duration, run.dt, seed, readout=config.readout,
        )
    kp = config.drive.kp
    if kp is None:
        kp = resolved_gs(config) * 2.0 * osc.k_m / osc.q
    if mode == "position":
        return simulate.simulate_position(
            osc, bath, config.drive, kp, run.duration, run.dt, seed
        )
    if config.feedback.pll is None:
        raise ConfigError("feedback.pll", "pll mode needs this section")
    return simulate.run_pll(
        osc, bath, config.drive, kp, config.feedback.pll,
        run.duration, run.dt, seed,
        demod_bandwidth=run.demod_bandwidth_hz,
        control_rate=run.control_rate_hz,
        lock_fraction=run.lock_fraction,
    )


def trace_rows(trace):
    """(columns, rows) for CSV export of either trace type."""
    t = trace.t
    if hasattr(trace, "x1"):
        if "freq_hz" in trace.extras:
            cols = ("t_s", "x1_m", "x2_m", "freq_hz")
            rows = list(zip(t, trace.x1, trace.x2, trace.extras["freq_hz"]))
        else:
            cols = ("t_s", "x1_m", "x2_m")
            rows = list(zip(t, trace.x1, trace.x2))
    else:
        cols = ("t_s", "x_m")
        rows = list(zip(t, trace.x))
    return cols, rows


NPZ_MAGIC = "SQZTRACE"
NPZ_FORMAT_VERSION = 1


def save_trace_npz(trace, path):
    """Self-describing binary trace export."""
    payload = {
        "magic": np.array(NPZ_MAGIC),
        "format_version": np.array(NPZ_FORMAT_VERSION),
        "tool_version": np.array(VERSION),
        "dt": np.array(trace.dt),
        "seed": np.array(trace.seed),
        "divergent": np.array(trace.divergent),
    }
    if hasattr(trace, "x1"):
        payload["length"] = np.array(trace.x1.size)
        payload["x1"] = trace.x1
        payload["x2"] = trace.x2
        if "freq_hz" in trace.extras:
            payload["freq_hz"] = trace.extras["freq_hz"]
    else:
        payload["length"] = np.array(trace.x.size)
        payload["x"] = trace.x
        payload["drive_phase"] = trace.drive_phase
    np.savez(path, **payload)


# -------------------------------------------------------------- fit/allan

def run_fit(config: ExperimentConfig):
    """Lorentzian fit of a stored spectrum; returns the JSON-ready report."""
    if config.fit is None:
        raise ConfigError("fit", "missing section")
    _, cols = read_csv_columns(config.fit.input)
    if "f_hz" not in cols or "psd_m2_per_hz" not in cols:
        raise ConfigError(
            config.fit.input, "expected columns f_hz,psd_m2_per_hz"
        )
    exclude = config.fit.exclude_halfwidth_hz
    fit = spectral.lorentzian_fit(
        exclude_halfwidth=exclude,
        freqs=cols["f_hz"],
        values=cols["psd_m2_per_hz"],
    )
    return {
        "input": str(config.fit.input),
        "exclude_halfwidth_hz": exclude,
        "center_hz": fit.center,
        "center_sigma_hz": fit.center_sigma,
        "gamma_hz": fit.gamma,
        "gamma_sigma_hz": fit.gamma_sigma,
        "area_m2": fit.area,
        "area_sigma_m2": fit.area_sigma,
        "floor_m2_per_hz": fit.floor,
        "floor_sigma_m2_per_hz": fit.floor_sigma,
        "variance_m2": spectral.variance_from_fit(fit),
        "n_used": fit.n_used,
        "n_excluded": fit.n_excluded,
    }


def format_fit_report(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _auto_taus(n_samples, sample_rate):
    """Log-spaced averaging times, integer in samples, >= 3 bins each."""
    taus = []
    m = 1
    while n_samples // m >= 3:
        taus.append(m / sample_rate)
        m_next = max(m + 1, int(round(m * 1.6)))
        m = m_next
    return taus


def run_allan(config: ExperimentConfig):
    """Allan deviation of a stored frequency record."""
    if config.allan is None:
        raise ConfigError("allan", "missing section")
    spec = config.allan
    meta, cols = read_csv_columns(spec.input)
    if "freq_hz" not in cols:
        raise ConfigError(spec.input, "expected a freq_hz column")
    freq = cols["freq_hz"]
    if "sample_rate_hz" not in meta:
        raise ConfigError(
            spec.input, "missing '# sample_rate_hz = ...' header"
        )
    try:
        sample_rate = float(meta["sample_rate_hz"])
    except ValueError:
        raise ConfigError(
            spec.input, f"bad sample_rate_hz: {meta['sample_rate_hz']!r}"
        ) from None
    f0 = spec.f0_hz
    if f0 is None:
        f0 = float(freq.mean())
    taus = spec.taus_s
    if taus is None:
        taus = tuple(_auto_taus(freq.size, sample_rate))
    devs = spectral.allan_deviation(freq, f0, taus, sample_rate)
    rows = list(zip(taus, devs))
    meta_out = [
        ("f0_hz", f0),
        ("sample_rate_hz", sample_rate),
        ("n_samples", freq.size),
    ]
    return ("tau_s", "allan_dev"), rows, meta_out
