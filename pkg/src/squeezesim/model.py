"""Parameter containers and thermodynamic helpers.

All quantities are SI internally: masses in kg, angular frequencies in
rad/s, rates in rad/s (i.e. 1/s), temperatures in K, displacements in m.
Convenience units (MHz, mV, ng, ...) are accepted only at the config
boundary, see `squeezesim.config`.

The mechanical mode is the usual damped oscillator

    x'' + Gamma_m x' + Omega_m^2 x = F / m

parametrised by (m, Omega_m, Gamma_m); Q = Omega_m / Gamma_m.  Containers
are frozen dataclasses so they can be shared freely between worker
threads and hashed into output-file headers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .constants import HBAR, KBOLTZ
from .errors import LowQualityFactorWarning, MeasurementRequiredError

#: Q below this triggers LowQualityFactorWarning: the rotating-frame
#: description assumes all rates are slow against the carrier.
LOW_Q_LIMIT = 100.0


@dataclass(frozen=True)
class OscillatorParams:
    """Mechanical mode: effective mass [kg], resonance [rad/s], damping [rad/s]."""

    mass: float
    omega_m: float
    gamma_m: float

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.omega_m <= 0:
            raise ValueError(f"omega_m must be positive, got {self.omega_m}")
        if self.gamma_m <= 0:
            raise ValueError(f"gamma_m must be positive, got {self.gamma_m}")
        if self.q < LOW_Q_LIMIT:
            warnings.warn(
                f"Q = {self.q:.3g} < {LOW_Q_LIMIT:g}: rotating-frame model "
                "assumes rates slow against the carrier",
                LowQualityFactorWarning,
                stacklevel=2,
            )

    @classmethod
    def from_q(cls, mass, omega_m, q):
        """Construct from quality factor instead of damping rate."""
        return cls(mass=mass, omega_m=omega_m, gamma_m=omega_m / q)

    @property
    def q(self):
        return self.omega_m / self.gamma_m

    @property
    def k_m(self):
        """Mechanical spring constant m Omega_m^2 [N/m]."""
        return self.mass * self.omega_m**2

    @property
    def x_zpf(self):
        """Zero-point displacement amplitude [m]."""
        return zero_point_amplitude(self.mass, self.omega_m)


@dataclass(frozen=True)
class ThermalBath:
    """Thermal environment at `temperature` [K] (0 allowed)."""

    temperature: float

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")

    def occupancy(self, osc: OscillatorParams):
        return occupancy(self.temperature, osc.omega_m)

    def sigma0_sq(self, osc: OscillatorParams):
        return classical_sigma0_sq(self.temperature, osc.mass, osc.omega_m)


@dataclass(frozen=True)
class DriveConfig:
    """Near-resonant force drive plus the phase of the stiffness pump.

    f0      : drive force amplitude [N] (F_d = f0 cos(Omega t))
    phi_p   : pump phase [rad], restricted to the two operating points
              0 (deamplification / squeezing of the driven quadrature)
              and +-pi/2 (amplification).  The phase is defined at the
              drive oscillator, *before* frequency doubling; the
              stiffness modulation therefore carries 2*phi_p.
    gs      : normalized squeezing rate Gamma_s / Gamma_m (optional)
    kp      : stiffness modulation amplitude [N/m] (optional)

    When both gs and kp are given they must agree:  gs = kp Q / (2 k_m).
    """

    f0: float = 0.0
    phi_p: float = 0.0
    gs: float | None = None
    kp: float | None = None

    _ALLOWED_PHASES = (0.0, math.pi / 2, -math.pi / 2)

    def __post_init__(self):
        if self.f0 < 0:
            raise ValueError(f"f0 must be >= 0, got {self.f0}")
        if not any(abs(self.phi_p - p) < 1e-12 for p in self._ALLOWED_PHASES):
            raise ValueError(
                f"phi_p must be one of 0, +pi/2, -pi/2, got {self.phi_p}"
            )
        if self.gs is not None and self.gs < 0:
            raise ValueError(f"gs must be >= 0, got {self.gs}")
        if self.kp is not None and self.kp < 0:
            raise ValueError(f"kp must be >= 0, got {self.kp}")

    @property
    def operating_point(self):
        """'deamplify' for phi_p = 0, 'amplify' for phi_p = +-pi/2."""
        return "deamplify" if self.phi_p == 0.0 else "amplify"


def resolve_gs(drive: DriveConfig, osc: OscillatorParams):
    """Normalized squeezing rate g_s for `drive` on `osc`.

    Uses gs directly when given, otherwise converts kp via
    Gamma_s = kp / (2 m Omega_m), g_s = Gamma_s / Gamma_m = kp Q / (2 k_m).
    When both are present they must be mutually consistent to 1 part in 1e12.
    """
    from_kp = None
    if drive.kp is not None:
        from_kp = drive.kp * osc.q / (2.0 * osc.k_m)
    if drive.gs is not None:
        if from_kp is not None and not math.isclose(
            drive.gs, from_kp, rel_tol=1e-12, abs_tol=1e-300
        ):
            raise ValueError(
                f"gs = {drive.gs!r} inconsistent with kp: kp Q / (2 k_m) = {from_kp!r}"
            )
        return drive.gs
    if from_kp is not None:
        return from_kp
    return 0.0


@dataclass(frozen=True)
class PllConfig:
    """Phase-locked-loop settings for drive-frequency feedback.

    proportional : P gain [Hz per rad of phase error]
    integral     : I gain [Hz per (rad s)]
    bandwidth    : closed-loop bandwidth estimate [Hz], used to size the
                   near-carrier exclusion window in spectral fits.
    """

    proportional: float
    integral: float = 0.0
    bandwidth: float | None = None

    def __post_init__(self):
        if self.proportional < 0 or self.integral < 0:
            raise ValueError("PLL gains must be >= 0")

    @property
    def bandwidth_hz(self):
        # crude crossover estimate: open loop 2 pi P / s hits unity at 2 pi P
        return self.bandwidth if self.bandwidth is not None else self.proportional


@dataclass(frozen=True)
class FeedbackConfig:
    """Phase-quadrature damping feedback.

    gfb : normalized feedback damping rate Gamma_fb / Gamma_m applied to
          the phase quadrature.
    pll : optional PLL settings when the damping is realised by
          frequency feedback on the drive oscillator.
    """

    gfb: float = 0.0
    pll: PllConfig | None = None

    def __post_init__(self):
        if self.gfb < 0:
            raise ValueError(f"gfb must be >= 0, got {self.gfb}")


@dataclass(frozen=True)
class QuantumReadout:
    """Continuous interferometric position measurement.

    gamma_qba : normalized quantum backaction rate Gamma_qba / Gamma_m,
                with Gamma_qba = 4 g^2 / kappa for cavity-enhanced readout.
    eta_det   : total detection efficiency in (0, 1].

    The normalized measurement rate is g_meas = eta_det * gamma_qba.
    """

    gamma_qba: float
    eta_det: float = 1.0

    def __post_init__(self):
        if self.gamma_qba < 0:
            raise ValueError(f"gamma_qba must be >= 0, got {self.gamma_qba}")
        if not 0.0 < self.eta_det <= 1.0:
            raise ValueError(f"eta_det must be in (0, 1], got {self.eta_det}")

    @classmethod
    def from_cavity(cls, g, kappa, osc: OscillatorParams, eta_det=1.0):
        """Build from optomechanical coupling g and cavity linewidth kappa
        (both rad/s): Gamma_qba = 4 g^2 / kappa."""
        gamma_qba = 4.0 * g**2 / kappa / osc.gamma_m
        return cls(gamma_qba=gamma_qba, eta_det=eta_det)

    @property
    def g_meas(self):
        return self.eta_det * self.gamma_qba

    def require_measurement(self, gfb):
        """Feedback without measurement has undefined imprecision noise."""
        if gfb > 0 and self.g_meas == 0:
            raise MeasurementRequiredError(
                "g_fb > 0 requires g_meas = eta_det * gamma_qba > 0"
            )


def occupancy(temperature, omega_m):
    """Bose-Einstein occupancy of a mode at `omega_m` [rad/s], T [K].

    Returns 0 at T = 0.  Evaluated via expm1 so the classical limit
    k_B T >> hbar Omega does not lose precision.
    """
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if omega_m <= 0:
        raise ValueError(f"omega_m must be positive, got {omega_m}")
    if temperature == 0.0:
        return 0.0
    return 1.0 / math.expm1(HBAR * omega_m / (KBOLTZ * temperature))


def zero_point_amplitude(mass, omega_m):
    """x_zpf = sqrt(hbar / (2 m Omega_m)) [m]."""
    if mass <= 0 or omega_m <= 0:
        raise ValueError("mass and omega_m must be positive")
    return math.sqrt(HBAR / (2.0 * mass * omega_m))


def classical_sigma0_sq(temperature, mass, omega_m):
    """Equipartition position variance k_B T / (m Omega_m^2) [m^2]."""
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if mass <= 0 or omega_m <= 0:
        raise ValueError("mass and omega_m must be positive")
    return KBOLTZ * temperature / (mass * omega_m**2)
