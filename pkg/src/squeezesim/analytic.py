"""Closed-form rotating-frame theory for the parametrically squeezed,
feedback-stabilized oscillator.

Writing the motion as x(t) = X1(t) sin(Omega t) + X2(t) cos(Omega t) with
the stiffness pumped at 2 Omega (pump phase at its deamplification
operating point), the slow quadratures obey independent first-order
Langevin equations with relaxation rates

    Gamma_1 = Gamma_m (1 + g_s)              (squeezed, driven quadrature)
    Gamma_2 = Gamma_m (1 - g_s + g_fb)       (anti-squeezed, damped by feedback)

where g_s = Gamma_s / Gamma_m is the normalized squeezing rate and
g_fb = Gamma_fb / Gamma_m the normalized feedback damping of X2.  The
system is stable iff Gamma_2 > 0.  Thermally driven steady-state
variances are

    sigma_1^2 / sigma_0^2 = 1 / (1 + g_s)
    sigma_2^2 / sigma_0^2 = 1 / (1 - g_s + g_fb),     sigma_0^2 = k_B T / (m Omega_m^2)

so without feedback the squeezed-quadrature variance saturates at -3 dB
(g_s -> 1).  The quantum treatment adds measurement backaction at
normalized rate gamma_qba, detection efficiency eta_det (measurement
rate g_meas = eta_det gamma_qba), and the fed-back imprecision noise:

    sigma_1^2 = x_zpf^2 [ (2 nbar + 1) + 2 gamma_qba ] / (1 + g_s)
    sigma_2^2 = x_zpf^2 [ (2 nbar + 1) + g_fb^2 / (8 g_meas) + 2 gamma_qba ]
                / (1 - g_s + g_fb)

All spectra here are double-sided in angular frequency, normalized so
that the variance is the integral over d omega / (2 pi).  The CLI layer
converts to single-sided spectra in Hz on output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InstabilityError, ThresholdError
from .model import OscillatorParams, QuantumReadout, ThermalBath

_SPECTRUM_KINDS = ("X1", "X2", "Y1", "Y2")


@dataclass(frozen=True)
class QuadratureVariances:
    """Steady-state variances of the two rotating-frame quadratures [m^2]."""

    sigma1_sq: float
    sigma2_sq: float
    stable: bool = True

    def db10(self, reference_sq):
        """Variance ratios in dB (10 log10), referenced to `reference_sq`."""
        return (
            10.0 * math.log10(self.sigma1_sq / reference_sq),
            10.0 * math.log10(self.sigma2_sq / reference_sq),
        )


@dataclass(frozen=True)
class SpectrumModel:
    """Model spectrum on an angular-frequency grid.

    frequencies [rad/s]; values are double-sided PSD, m^2 s for the
    displacement quadratures (X1/X2) and dimensionless (shot-noise
    units) for the homodyne photocurrent quadratures (Y1/Y2).
    """

    frequencies: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in _SPECTRUM_KINDS:
            raise ValueError(f"kind must be one of {_SPECTRUM_KINDS}, got {self.kind}")


def _check_rates(gs, gfb):
    if gs < 0:
        raise ValueError(f"gs must be >= 0, got {gs}")
    if gfb < 0:
        raise ValueError(f"gfb must be >= 0, got {gfb}")


def quadrature_rates(osc: OscillatorParams, gs, gfb):
    """(Gamma_1, Gamma_2) [rad/s] for the two quadratures."""
    _check_rates(gs, gfb)
    return osc.gamma_m * (1.0 + gs), osc.gamma_m * (1.0 - gs + gfb)


def susceptibilities(omega, osc: OscillatorParams, gs, gfb):
    """Rotating-frame susceptibilities (chi_1, chi_2) at `omega` [rad/s].

    chi_i(omega) = 1 / (2 m Omega_m [-i omega + Gamma_i / 2]); the
    quadrature responses to the conjugate force quadratures are
    dX1 = chi_1 F_2 and dX2 = -chi_2 F_1.  Defined for any gs, gfb
    (diverges on the real axis at the instability boundary).
    """
    _check_rates(gs, gfb)
    omega = np.asarray(omega, dtype=float)
    gamma1, gamma2 = quadrature_rates(osc, gs, gfb)
    scale = 2.0 * osc.mass * osc.omega_m
    with np.errstate(divide="ignore", invalid="ignore"):
        chi1 = 1.0 / (scale * (-1j * omega + gamma1 / 2.0))
        chi2 = 1.0 / (scale * (-1j * omega + gamma2 / 2.0))
    return chi1, chi2


def classical_variances(gs, gfb, sigma0_sq) -> QuadratureVariances:
    """Thermal steady-state quadrature variances.

    sigma0_sq is the undriven equipartition variance k_B T / (m Omega_m^2).
    Raises InstabilityError when 1 - gs + gfb <= 0 (no steady state).
    """
    _check_rates(gs, gfb)
    if sigma0_sq <= 0:
        raise ValueError(f"sigma0_sq must be positive, got {sigma0_sq}")
    denom2 = 1.0 - gs + gfb
    if denom2 <= 0.0:
        raise InstabilityError(
            f"1 - gs + gfb = {denom2:.6g} <= 0: phase quadrature unstable"
        )
    return QuadratureVariances(
        sigma1_sq=sigma0_sq / (1.0 + gs),
        sigma2_sq=sigma0_sq / denom2,
        stable=True,
    )


def amplitude_gain(gs, operating_point):
    """Coherent response gain of the driven quadrature amplitude.

    'deamplify' (pump phase 0):      1 / (1 + gs)
    'amplify'   (pump phase +-pi/2): 1 / (1 - gs), defined only below
    threshold (raises ThresholdError at gs >= 1).
    """
    _check_rates(gs, 0.0)
    if operating_point == "deamplify":
        return 1.0 / (1.0 + gs)
    if operating_point == "amplify":
        if gs >= 1.0:
            raise ThresholdError(f"amplification gain undefined at gs = {gs} >= 1")
        return 1.0 / (1.0 - gs)
    raise ValueError(
        f"operating_point must be 'deamplify' or 'amplify', got {operating_point!r}"
    )


def steady_state_amplitude(f0, osc: OscillatorParams, gs):
    """Mean driven amplitude of the in-phase quadrature.

    A resonant force F = f0 cos(Omega_m t) rings up the sin quadrature to
    X1bar = f0 / (m Omega_m Gamma_m (1 + gs)); X2bar = 0.
    """
    _check_rates(gs, 0.0)
    if f0 < 0:
        raise ValueError(f"f0 must be >= 0, got {f0}")
    return f0 / (osc.mass * osc.omega_m * osc.gamma_m * (1.0 + gs))


def quantum_variances(
    gs, gfb, nbar, readout: QuantumReadout, x_zpf_sq
) -> QuadratureVariances:
    """Steady-state variances including backaction and fed-back imprecision.

    Raises InstabilityError beyond the stability boundary and
    MeasurementRequiredError when gfb > 0 with g_meas = 0.
    """
    _check_rates(gs, gfb)
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if x_zpf_sq <= 0:
        raise ValueError(f"x_zpf_sq must be positive, got {x_zpf_sq}")
    readout.require_measurement(gfb)
    denom2 = 1.0 - gs + gfb
    if denom2 <= 0.0:
        raise InstabilityError(
            f"1 - gs + gfb = {denom2:.6g} <= 0: phase quadrature unstable"
        )
    thermal = 2.0 * nbar + 1.0
    fb_noise = gfb**2 / (8.0 * readout.g_meas) if gfb > 0 else 0.0
    sigma1_sq = x_zpf_sq * (thermal + 2.0 * readout.gamma_qba) / (1.0 + gs)
    sigma2_sq = x_zpf_sq * (thermal + fb_noise + 2.0 * readout.gamma_qba) / denom2
    return QuadratureVariances(sigma1_sq=sigma1_sq, sigma2_sq=sigma2_sq, stable=True)


def optimal_feedback_gain(gs, nbar, readout: QuantumReadout):
    """Feedback gain minimizing the phase-quadrature variance.

    Minimizing sigma_2^2(g_fb) = x_zpf^2 [A + g_fb^2/(8 g_meas)] / (B + g_fb)
    with A = (2 nbar + 1) + 2 gamma_qba, B = 1 - gs, gives

        g_fb* = -B + sqrt(B^2 + 8 g_meas A)

    which always lies in the stable region (B + g_fb* > 0).  At the
    optimum sigma_2^2 = x_zpf^2 g_fb* / (4 g_meas).  Requires g_meas > 0.
    """
    _check_rates(gs, 0.0)
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if readout.g_meas <= 0:
        raise ValueError("optimal feedback gain requires g_meas > 0")
    a = (2.0 * nbar + 1.0) + 2.0 * readout.gamma_qba
    b = 1.0 - gs
    return -b + math.sqrt(b**2 + 8.0 * readout.g_meas * a)


def purity(variances: QuadratureVariances, x_zpf_sq):
    """Gaussian-state purity x_zpf^2 / (sigma_1 sigma_2).

    Equals 1 for the vacuum; for strong squeezing with fast, efficient
    measurement and feedback at its optimum it approaches sqrt(eta_det)
    from below.
    """
    if x_zpf_sq <= 0:
        raise ValueError(f"x_zpf_sq must be positive, got {x_zpf_sq}")
    return x_zpf_sq / math.sqrt(variances.sigma1_sq * variances.sigma2_sq)


def detection_snr(gs, nbar, readout: QuantumReadout):
    """Peak signal-to-imprecision ratio of the squeezed quadrature.

    Ratio of the zero-frequency thermal+backaction spectrum of X1 to the
    imprecision floor x_zpf^2 / (2 Gamma_meas):

        SNR = 8 g_meas [ (2 nbar + 1) + 2 gamma_qba ] / (1 + gs)^2

    The measurable/not-measurable boundary is SNR = 1.
    """
    _check_rates(gs, 0.0)
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    a = (2.0 * nbar + 1.0) + 2.0 * readout.gamma_qba
    return 8.0 * readout.g_meas * a / (1.0 + gs) ** 2


def _force_noise_rates(osc, bath, gs, gfb, readout):
    """White-noise numerators N_i such that S_Xi = N_i / (omega^2 + (Gamma_i/2)^2).

    Classical (readout None): N = Gamma_m sigma_0^2 for both quadratures.
    Quantum: N_1 = x_zpf^2 [Gamma_m (2 nbar + 1) + 2 Gamma_qba] and N_2
    additionally carries the fed-back imprecision Gamma_fb^2 / (8 Gamma_meas).
    """
    if readout is None:
        n_th = osc.gamma_m * bath.sigma0_sq(osc)
        return n_th, n_th
    readout.require_measurement(gfb)
    x2 = osc.x_zpf**2
    nbar = bath.occupancy(osc)
    gamma_qba = readout.gamma_qba * osc.gamma_m
    base = x2 * (osc.gamma_m * (2.0 * nbar + 1.0) + 2.0 * gamma_qba)
    n2 = base
    if gfb > 0:
        gamma_fb = gfb * osc.gamma_m
        gamma_meas = readout.g_meas * osc.gamma_m
        n2 = base + x2 * gamma_fb**2 / (8.0 * gamma_meas)
    return base, n2


def quadrature_psd(
    omega,
    osc: OscillatorParams,
    bath: ThermalBath,
    gs,
    gfb,
    readout: QuantumReadout | None = None,
    quadrature="X1",
) -> SpectrumModel:
    """Double-sided displacement PSD of a rotating-frame quadrature.

    Lorentzians centred at zero with half-widths Gamma_i / 2; integrating
    over d omega / (2 pi) reproduces the steady-state variances.  With
    `readout=None` the classical thermal spectrum is returned; otherwise
    thermal + backaction (+ fed-back imprecision on X2).  Raises
    InstabilityError for an unstable operating point.
    """
    _check_rates(gs, gfb)
    if quadrature not in ("X1", "X2"):
        raise ValueError(f"quadrature must be 'X1' or 'X2', got {quadrature!r}")
    gamma1, gamma2 = quadrature_rates(osc, gs, gfb)
    if gamma2 <= 0:
        raise InstabilityError(
            f"Gamma_2 = {gamma2:.6g} <= 0: no stationary spectrum"
        )
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n1, n2 = _force_noise_rates(osc, bath, gs, gfb, readout)
    if quadrature == "X1":
        values = n1 / (omega**2 + (gamma1 / 2.0) ** 2)
    else:
        values = n2 / (omega**2 + (gamma2 / 2.0) ** 2)
    return SpectrumModel(frequencies=omega, values=values, kind=quadrature)


def homodyne_psd(
    omega,
    osc: OscillatorParams,
    bath: ThermalBath,
    gs,
    gfb,
    readout: QuantumReadout,
    quadrature="Y1",
) -> SpectrumModel:
    """Shot-noise-normalized homodyne photocurrent PSD.

    S_Y1 = 1/2 + (Gamma_meas / x_zpf^2) S_X1.  The in-loop quadrature
    additionally carries the noise-squashing cross-correlation between
    measured imprecision and fed-back force:

    S_Y2 = 1/2 + (Gamma_meas / x_zpf^2) S_X2
               - (Gamma_fb / 4) Gamma_2 / (omega^2 + (Gamma_2 / 2)^2)

    which can dip below the shot-noise floor of 1/2 (in-loop squashing)
    but never below zero.
    """
    if quadrature not in ("Y1", "Y2"):
        raise ValueError(f"quadrature must be 'Y1' or 'Y2', got {quadrature!r}")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    x2 = osc.x_zpf**2
    gamma_meas = readout.g_meas * osc.gamma_m
    if quadrature == "Y1":
        s_x = quadrature_psd(omega, osc, bath, gs, gfb, readout, "X1")
        values = 0.5 + gamma_meas / x2 * s_x.values
    else:
        s_x = quadrature_psd(omega, osc, bath, gs, gfb, readout, "X2")
        _, gamma2 = quadrature_rates(osc, gs, gfb)
        gamma_fb = gfb * osc.gamma_m
        squash = (gamma_fb / 4.0) * gamma2 / (omega**2 + (gamma2 / 2.0) ** 2)
        values = 0.5 + gamma_meas / x2 * s_x.values - squash
    return SpectrumModel(frequencies=omega, values=values, kind=quadrature)
