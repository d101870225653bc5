"""Time-domain simulation: rotating-frame quadrature SDEs, the full
position-space oscillator under a pumped stiffness, digital lock-in
demodulation, and the closed PLL loop that stabilizes operation above
the parametric threshold.

Conventions match the analytic module: x(t) = X1 sin(theta) + X2
cos(theta) with theta the drive oscillator phase, stiffness pumped at
2 theta.  The rotating-frame quadratures are exact Ornstein-Uhlenbeck
processes, so they are advanced with the exact one-step update

    X[n+1] = exp(-lambda dt) X[n] + w[n],   Var w = S (1 - exp(-2 lambda dt)) / (2 lambda)

(S the white force-noise PSD mapped into the quadrature) rather than an
Euler scheme; there is no step-size bias, dt only sets the spectral
band.  The position-space integrator is semi-implicit Euler (symplectic
drift), which preserves the oscillation amplitude over millions of
carrier cycles.

All random numbers come from counter-based Philox streams keyed by
(seed, stream-id), so every trace is bit-exact reproducible and
independent of chunking or thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .analytic import _force_noise_rates, quadrature_rates
from .constants import KBOLTZ
from .errors import AliasingError, StepSizeError
from .model import (
    DriveConfig,
    OscillatorParams,
    PllConfig,
    QuantumReadout,
    ThermalBath,
)

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


# stream ids for the (seed, stream) Philox keys
_STREAM_X1 = 0
_STREAM_X2 = 1
_STREAM_FORCE = 2
_STREAM_FREQ = 3

#: traces are truncated and flagged once an unstable run exceeds this
DIVERGENCE_LIMIT = 1e120


@dataclass
class QuadratureTrace:
    """Sampled rotating-frame quadratures [m] at spacing dt [s]."""

    dt: float
    x1: np.ndarray
    x2: np.ndarray
    seed: int
    params: dict
    divergent: bool = False
    lock_lost: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def t(self):
        return np.arange(self.x1.size) * self.dt

    def steady(self, discard_time):
        """(x1, x2) with the initial `discard_time` seconds dropped."""
        n = int(math.ceil(discard_time / self.dt))
        return self.x1[n:], self.x2[n:]


@dataclass
class PositionTrace:
    """Sampled oscillator position [m] and drive phase [rad] at spacing dt."""

    dt: float
    x: np.ndarray
    drive_phase: np.ndarray
    seed: int
    params: dict
    divergent: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def t(self):
        return np.arange(self.x.size) * self.dt


def _rng(seed, stream):
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))
    )


def _ou_exact(lam, noise_psd, dt, n, x0, rng):
    """Exact OU trace of length n+1 (includes x0) for dx = -lam x dt + noise.

    `noise_psd` is the double-sided white PSD S of the driving term in
    the omega convention (variance = integral S / (omega^2 + lam^2)
    d omega / 2 pi = S / (2 lam)).  Valid for lam of any sign; lam < 0
    grows exponentially.
    """
    a = math.exp(-lam * dt)
    two_ld = 2.0 * lam * dt
    if abs(two_ld) < 1e-12:
        var_inc = noise_psd * dt
    else:
        var_inc = noise_psd * (-math.expm1(-two_ld)) / (2.0 * lam)
    w = rng.standard_normal(n) * math.sqrt(var_inc)
    # AR(1) via an IIR filter: y[k] = a y[k-1] + w[k], seeded with x0
    y, _ = lfilter([1.0], [1.0, -a], w, zi=np.array([a * x0]))
    return np.concatenate(([x0], y))


def rotating_frame_step_limit(osc: OscillatorParams, gs, gfb):
    """Largest dt resolving all rotating-frame rates (1% of fastest)."""
    fastest = osc.gamma_m * max(1.0, 1.0 + gs, abs(1.0 - gs + gfb))
    return 0.01 / fastest


def simulate_rotating(
    osc: OscillatorParams,
    bath: ThermalBath,
    gs,
    gfb,
    duration,
    dt,
    seed,
    readout: QuantumReadout | None = None,
    x1_0=0.0,
    x2_0=0.0,
    stream_offset=0,
) -> QuadratureTrace:
    """Integrate the two uncoupled quadrature Langevin equations.

    Classical thermal noise by default; passing `readout` switches to
    the quantum noise budget (thermal + backaction on both quadratures,
    fed-back imprecision on X2 when gfb > 0).  An unstable operating
    point (1 - gs + gfb <= 0) is integrated anyway; the trace is
    truncated and flagged `divergent` once it exceeds DIVERGENCE_LIMIT.

    `stream_offset` shifts the pair of Philox stream ids so sweep cells
    sharing one base seed stay statistically independent.
    """
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    limit = rotating_frame_step_limit(osc, gs, gfb)
    if dt > limit:
        raise StepSizeError(
            f"dt = {dt:.3e} s too coarse for the quadrature rates; need <= {limit:.3e} s"
        )
    n = int(round(duration / dt))
    if n < 2:
        raise ValueError("duration must cover at least two steps")
    gamma1, gamma2 = quadrature_rates(osc, gs, gfb)
    # _force_noise_rates returns the displacement-domain white-noise PSDs:
    # S_Xi(omega) = N_i / (omega^2 + (Gamma_i/2)^2)
    n1, n2 = _force_noise_rates(osc, bath, gs, gfb, readout)
    x1 = _ou_exact(gamma1 / 2.0, n1, dt, n, x1_0,
                   _rng(seed, _STREAM_X1 + 3 * stream_offset))
    x2 = _ou_exact(gamma2 / 2.0, n2, dt, n, x2_0,
                   _rng(seed, _STREAM_X2 + 3 * stream_offset))
    divergent = False
    bad = np.flatnonzero(~np.isfinite(x2) | (np.abs(x2) > DIVERGENCE_LIMIT))
    if bad.size:
        divergent = True
        cut = bad[0]
        x1, x2 = x1[:cut], x2[:cut]
    params = {
        "gs": gs,
        "gfb": gfb,
        "duration": duration,
        "dt": dt,
        "temperature": bath.temperature,
        "mass": osc.mass,
        "omega_m": osc.omega_m,
        "gamma_m": osc.gamma_m,
        "quantum": readout is not None,
    }
    if readout is not None:
        params["gamma_qba"] = readout.gamma_qba
        params["eta_det"] = readout.eta_det
    return QuadratureTrace(
        dt=dt, x1=x1, x2=x2, seed=seed, params=params, divergent=divergent
    )


def _position_step_limit(omega_m):
    # at least 16 samples per carrier period
    return math.pi / (8.0 * omega_m)


def _position_kernel_py(
    x, v, theta, n, dt, gamma, km_over_m, kp_over_m, psi, f0_over_m, omega, noise, out
):
    for i in range(n):
        stiff = km_over_m + kp_over_m * math.sin(2.0 * theta + psi)
        a = -gamma * v - stiff * x + f0_over_m * math.cos(theta) + noise[i]
        v = v + dt * a
        x = x + dt * v
        theta = theta + omega * dt
        out[i] = x
    return x, v, theta


if _HAVE_NUMBA:
    _position_kernel = njit(cache=True, fastmath=False)(_position_kernel_py)
else:  # pragma: no cover
    _position_kernel = _position_kernel_py


def simulate_position(
    osc: OscillatorParams,
    bath: ThermalBath,
    drive: DriveConfig,
    kp,
    duration,
    dt,
    seed,
    omega_drive=None,
    x0=0.0,
    v0=0.0,
    record_force=False,
) -> PositionTrace:
    """Integrate the full second-order equation of motion.

        x'' + Gamma_m x' + [k_m + kp sin(2 theta + 2 phi_p)] x / m
            = [F_th + f0 cos(theta)] / m,      theta = Omega t

    with white thermal force of double-sided PSD 2 m Gamma_m k_B T.
    Semi-implicit Euler; dt must give >= 16 samples per carrier period.
    The pump phase convention carries the frequency doubling: drive.phi_p
    is defined at the drive oscillator, the stiffness sees 2 phi_p.
    """
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    omega = osc.omega_m if omega_drive is None else omega_drive
    if dt > _position_step_limit(omega):
        raise StepSizeError(
            f"dt = {dt:.3e} s under-resolves the carrier; "
            f"need <= {_position_step_limit(omega):.3e} s (16 samples/period)"
        )
    n = int(round(duration / dt))
    s_force = 2.0 * osc.mass * osc.gamma_m * KBOLTZ * bath.temperature
    rng = _rng(seed, _STREAM_FORCE)
    force = rng.standard_normal(n) * math.sqrt(s_force / dt) if s_force > 0 else np.zeros(n)
    out = np.empty(n)
    _position_kernel(
        float(x0),
        float(v0),
        0.0,
        n,
        dt,
        osc.gamma_m,
        osc.k_m / osc.mass,
        kp / osc.mass,
        2.0 * drive.phi_p,
        drive.f0 / osc.mass,
        omega,
        force / osc.mass,
        out,
    )
    x = np.concatenate(([x0], out))
    theta = np.arange(n + 1) * (omega * dt)
    divergent = False
    bad = np.flatnonzero(~np.isfinite(x) | (np.abs(x) > DIVERGENCE_LIMIT))
    if bad.size:
        divergent = True
        x, theta = x[: bad[0]], theta[: bad[0]]
    params = {
        "kp": kp,
        "f0": drive.f0,
        "phi_p": drive.phi_p,
        "omega_drive": omega,
        "duration": duration,
        "dt": dt,
        "temperature": bath.temperature,
        "mass": osc.mass,
        "omega_m": osc.omega_m,
        "gamma_m": osc.gamma_m,
    }
    trace = PositionTrace(
        dt=dt, x=x, drive_phase=theta, seed=seed, params=params, divergent=divergent
    )
    if record_force:
        trace.extras["force"] = force
        trace.extras["force_psd"] = s_force
    return trace


def _cascade_coeff(bandwidth, dt, sections=4):
    """Per-section pole for a cascade of identical one-pole low-passes
    whose overall -3 dB point sits at `bandwidth` [Hz]."""
    widen = math.sqrt(2.0 ** (1.0 / sections) - 1.0)
    omega_c = 2.0 * math.pi * bandwidth / widen
    return math.exp(-omega_c * dt)


def lockin_filter_response(freq_hz, bandwidth, dt, sections=4):
    """|H(f)|^2 of the demodulation filter cascade (discrete one-poles)."""
    a = _cascade_coeff(bandwidth, dt, sections)
    z = np.exp(-1j * 2.0 * math.pi * np.asarray(freq_hz, dtype=float) * dt)
    h = (1.0 - a) / (1.0 - a * z)
    return np.abs(h) ** (2 * sections)


def lockin_demodulate(
    trace: PositionTrace,
    omega=None,
    bandwidth=None,
    output_rate=None,
    sections=4,
) -> QuadratureTrace:
    """Digital lock-in: mix with sin/cos of the drive phase, low-pass,
    decimate.

    X1 = LP[2 x sin(theta)], X2 = LP[2 x cos(theta)]; the filter is a
    cascade of `sections` identical one-pole sections with overall -3 dB
    bandwidth `bandwidth` [Hz].  `omega` overrides the stored drive
    phase with theta = omega t.  Output is decimated to `output_rate`
    (default 8 x bandwidth); rates below 2 x bandwidth alias and raise.
    """
    if bandwidth is None or bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    carrier_hz = (
        omega / (2.0 * math.pi)
        if omega is not None
        else (trace.drive_phase[-1] - trace.drive_phase[0])
        / (2.0 * math.pi * trace.dt * (len(trace.x) - 1))
    )
    if bandwidth > carrier_hz / 4.0:
        raise StepSizeError(
            f"bandwidth {bandwidth:.3g} Hz not small against carrier {carrier_hz:.3g} Hz"
        )
    if output_rate is None:
        output_rate = 8.0 * bandwidth
    if output_rate < 2.0 * bandwidth:
        raise AliasingError(
            f"output rate {output_rate:.3g} Sa/s < 2 x bandwidth {bandwidth:.3g} Hz"
        )
    theta = (
        np.arange(len(trace.x)) * (omega * trace.dt)
        if omega is not None
        else trace.drive_phase
    )
    i_raw = 2.0 * trace.x * np.sin(theta)
    q_raw = 2.0 * trace.x * np.cos(theta)
    a = _cascade_coeff(bandwidth, trace.dt, sections)
    b, aden = [1.0 - a], [1.0, -a]
    for _ in range(sections):
        i_raw = lfilter(b, aden, i_raw)
        q_raw = lfilter(b, aden, q_raw)
    decim = max(1, int(round(1.0 / (trace.dt * output_rate))))
    x1 = i_raw[::decim].copy()
    x2 = q_raw[::decim].copy()
    params = dict(trace.params)
    params.update(
        {"bandwidth": bandwidth, "sections": sections, "decimation": decim}
    )
    return QuadratureTrace(
        dt=trace.dt * decim,
        x1=x1,
        x2=x2,
        seed=trace.seed,
        params=params,
        divergent=trace.divergent,
    )


def pll_effective_gfb(pll: PllConfig, osc: OscillatorParams):
    """Normalized phase-quadrature damping produced by the PLL.

    Linearizing the loop: a phase error phi = X2 / X1bar pulls the drive
    by delta Omega = 2 pi P phi, which enters the X2 equation as
    -delta Omega X1bar = -2 pi P X2, i.e. Gamma_fb = 4 pi P.
    """
    return 4.0 * math.pi * pll.proportional / osc.gamma_m


def run_pll(
    osc: OscillatorParams,
    bath: ThermalBath,
    drive: DriveConfig,
    kp,
    pll: PllConfig,
    duration,
    dt,
    seed,
    demod_bandwidth=None,
    control_rate=None,
    omega_start=None,
    lock_fraction=0.5,
    monitor_settle=None,
) -> QuadratureTrace:
    """Closed-loop run: position integration, lock-in demodulation, and a
    PI controller steering the drive frequency to null the phase
    quadrature.

    The drive, the frequency-doubled stiffness pump, and the
    demodulation reference all follow the common tracked phase theta(t).
    The loop measures phi_err = atan2(X2, X1) at the control rate
    (default 8 x demod bandwidth) and sets

        Omega = Omega_start + 2 pi (P phi_err + I integral(phi_err))

    which damps X2 at Gamma_fb = 4 pi P (see `pll_effective_gfb`), so a
    pump above the parametric threshold can be held stable.  The demod
    bandwidth must sit well above the loop bandwidth and well below the
    carrier.  Returns the filtered quadratures at the control rate; the
    tracked frequency [Hz] is in `extras["freq_hz"]`, suitable for
    stability analysis of the frequency record itself.

    The lock monitor (|X2| > lock_fraction |X1| latches `lock_lost`)
    only arms after `monitor_settle` seconds (default 20/Gamma_m):
    during ring-up both quadratures sit at noise level and the ratio is
    meaningless, and a loop with a soft integrator needs longer to pull
    in a starting detuning.
    """
    if drive.f0 <= 0:
        raise ValueError("run_pll needs a coherent drive (f0 > 0) as phase reference")
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    omega0 = osc.omega_m if omega_start is None else omega_start
    if dt > _position_step_limit(omega0):
        raise StepSizeError(
            f"dt = {dt:.3e} s under-resolves the carrier; "
            f"need <= {_position_step_limit(omega0):.3e} s"
        )
    carrier_hz = omega0 / (2.0 * math.pi)
    if demod_bandwidth is None:
        demod_bandwidth = carrier_hz / 100.0
    if demod_bandwidth > carrier_hz / 4.0:
        raise StepSizeError("demod bandwidth not small against the carrier")
    if control_rate is None:
        control_rate = 8.0 * demod_bandwidth
    if control_rate < 2.0 * demod_bandwidth:
        raise AliasingError("control rate < 2 x demod bandwidth aliases")
    chunk = max(1, int(round(1.0 / (control_rate * dt))))
    n_total = int(round(duration / dt))
    n_chunks = n_total // chunk
    if n_chunks < 8:
        raise ValueError("duration too short for the control rate")

    s_force = 2.0 * osc.mass * osc.gamma_m * KBOLTZ * bath.temperature
    sigma_f = math.sqrt(s_force / dt) if s_force > 0 else 0.0
    rng = _rng(seed, _STREAM_FORCE)

    a = _cascade_coeff(demod_bandwidth, dt)
    b_f, a_f = [1.0 - a], [1.0, -a]
    zi_i = [np.zeros(1) for _ in range(4)]
    zi_q = [np.zeros(1) for _ in range(4)]

    x1_out = np.empty(n_chunks)
    x2_out = np.empty(n_chunks)
    freq_out = np.empty(n_chunks)

    x, v, theta = 0.0, 0.0, 0.0
    omega = omega0
    integral = 0.0
    control_dt = chunk * dt
    psi = 2.0 * drive.phi_p
    km_over_m = osc.k_m / osc.mass
    kp_over_m = kp / osc.mass
    f0_over_m = drive.f0 / osc.mass
    lock_lost = False
    divergent = False
    out = np.empty(chunk)
    idx = np.arange(chunk) + 1.0
    if monitor_settle is None:
        monitor_settle = 20.0 / osc.gamma_m
    settle_chunks = int(math.ceil(monitor_settle / control_dt))

    for c in range(n_chunks):
        noise = rng.standard_normal(chunk) * sigma_f / osc.mass if sigma_f else np.zeros(chunk)
        theta_start = theta
        x, v, theta = _position_kernel(
            x, v, theta, chunk, dt, osc.gamma_m, km_over_m, kp_over_m, psi,
            f0_over_m, omega, noise, out,
        )
        if not math.isfinite(x) or abs(x) > DIVERGENCE_LIMIT:
            divergent = True
            n_chunks = c
            break
        phases = theta_start + idx * (omega * dt)
        i_raw = 2.0 * out * np.sin(phases)
        q_raw = 2.0 * out * np.cos(phases)
        for s in range(4):
            i_raw, zi_i[s] = lfilter(b_f, a_f, i_raw, zi=zi_i[s])
            q_raw, zi_q[s] = lfilter(b_f, a_f, q_raw, zi=zi_q[s])
        x1_f, x2_f = i_raw[-1], q_raw[-1]
        x1_out[c] = x1_f
        x2_out[c] = x2_f
        freq_out[c] = omega / (2.0 * math.pi)
        phi_err = math.atan2(x2_f, x1_f)
        if c >= settle_chunks and abs(x2_f) > lock_fraction * max(abs(x1_f), 1e-300):
            lock_lost = True
        integral += phi_err * control_dt
        omega = omega0 + 2.0 * math.pi * (
            pll.proportional * phi_err + pll.integral * integral
        )

    params = {
        "kp": kp,
        "f0": drive.f0,
        "phi_p": drive.phi_p,
        "duration": duration,
        "dt": dt,
        "control_rate": control_rate,
        "demod_bandwidth": demod_bandwidth,
        "pll_p": pll.proportional,
        "pll_i": pll.integral,
        "temperature": bath.temperature,
        "mass": osc.mass,
        "omega_m": osc.omega_m,
        "gamma_m": osc.gamma_m,
    }
    trace = QuadratureTrace(
        dt=control_dt,
        x1=x1_out[:n_chunks],
        x2=x2_out[:n_chunks],
        seed=seed,
        params=params,
        divergent=divergent,
        lock_lost=lock_lost,
    )
    trace.extras["freq_hz"] = freq_out[:n_chunks]
    return trace


def frequency_record(f0, duration, sample_rate, white_sigma=0.0, drift_rate=0.0,
                     seed=0):
    """Synthetic closed-loop frequency record for stability analysis.

    White frequency noise of standard deviation `white_sigma` [Hz] per
    sample plus an optional linear drift `drift_rate` [Hz/s] on top of
    the carrier f0.  This is the only drift model carried by the
    package; it exists to exercise the Allan-deviation estimator, not to
    model any physical drift mechanism.
    """
    if duration <= 0 or sample_rate <= 0:
        raise ValueError("duration and sample_rate must be positive")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    f = np.full(n, float(f0))
    if drift_rate != 0.0:
        f = f + drift_rate * t
    if white_sigma > 0.0:
        rng = _rng(seed, _STREAM_FREQ)
        f = f + white_sigma * rng.standard_normal(n)
    return t, f
