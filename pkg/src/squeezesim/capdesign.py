"""Capacitive actuator design: gap capacitance, parametric stiffness,
threshold voltage, electrostatic softening, static equilibrium / pull-in,
and the squeezing design map.  Also the linear piezo frequency tuning.

The electrode-membrane capacitance is modelled as

    C(x) = C0 + alpha / (d0 - x)

with displacement x measured toward the electrode, so the gap d0 - x
closes and C grows as x increases.  The electrostatic force at voltage V
is F = + C'(x) V^2 / 2 (attractive, toward the electrode), and a bias
V(t) = V_DC + V_p cos(Omega_p t) modulates the spring constant at
Omega_p with amplitude

    k_p = C''(x_eq) V_DC V_p

while the DC part softens the resonance,
Omega(V_DC) = Omega_m sqrt(1 - C''(x_eq) V_DC^2 / (2 k_m)).  Pumping at
Omega_p = 2 Omega reaches the parametric threshold g_s = 1 at

    V_th = 2 k_m / (Q V_DC C''(x_eq)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import (
    GapClosedError,
    PullInError,
    SofteningCollapseError,
    UndefinedThresholdError,
)
from .model import OscillatorParams


@dataclass(frozen=True)
class CapacitorGeometry:
    """Gap-capacitor electrode above the oscillator.

    alpha : capacitance-gap strength [F m] (C - C0 = alpha / gap)
    c0    : stray (gap-independent) capacitance [F]
    d0    : rest gap [m]
    vdc   : DC bias [V]
    vp    : pump amplitude at the parametric frequency [V]
    """

    alpha: float
    c0: float
    d0: float
    vdc: float = 0.0
    vp: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.c0 < 0:
            raise ValueError(f"c0 must be >= 0, got {self.c0}")
        if self.d0 <= 0:
            raise ValueError(f"d0 must be positive, got {self.d0}")
        if self.vdc < 0 or self.vp < 0:
            raise ValueError("voltages must be >= 0")


@dataclass(frozen=True)
class PiezoTuning:
    """Linear piezo frequency actuation, slope in Hz per volt
    (negative for the usual stress-relaxation softening)."""

    slope_hz_per_volt: float


def _check_gap(x, geom: CapacitorGeometry):
    if x >= geom.d0:
        raise GapClosedError(
            f"x = {x:.6g} m >= gap d0 = {geom.d0:.6g} m: electrode contact"
        )


def capacitance(x, geom: CapacitorGeometry):
    """C(x) [F]; strictly increasing in x, C -> c0 as the gap opens."""
    _check_gap(x, geom)
    return geom.c0 + geom.alpha / (geom.d0 - x)


def cap_gradient(x, geom: CapacitorGeometry):
    """dC/dx = alpha / (d0 - x)^2 [F/m]."""
    _check_gap(x, geom)
    return geom.alpha / (geom.d0 - x) ** 2


def cap_curvature(x, geom: CapacitorGeometry):
    """d2C/dx2 = 2 alpha / (d0 - x)^3 [F/m^2]."""
    _check_gap(x, geom)
    return 2.0 * geom.alpha / (geom.d0 - x) ** 3


def parametric_stiffness(geom: CapacitorGeometry, x_eq=0.0):
    """Stiffness modulation amplitude k_p = C''(x_eq) V_DC V_p [N/m]."""
    return cap_curvature(x_eq, geom) * geom.vdc * geom.vp


def threshold_voltage(osc: OscillatorParams, geom: CapacitorGeometry, x_eq=0.0,
                      vdc=None):
    """Pump amplitude reaching the parametric threshold g_s = 1.

    V_th = 2 k_m / (Q V_DC C''(x_eq)); halves when the DC bias doubles.
    `vdc` overrides the bias stored on the geometry.  Raises
    UndefinedThresholdError at zero bias.
    """
    v = geom.vdc if vdc is None else vdc
    if v == 0:
        raise UndefinedThresholdError("threshold voltage diverges at V_DC = 0")
    return 2.0 * osc.k_m / (osc.q * v * cap_curvature(x_eq, geom))


def normalized_squeezing_rate(
    osc: OscillatorParams, geom: CapacitorGeometry, x_eq=0.0
):
    """g_s = V_p / V_th = k_p Q / (2 k_m) for the configured bias and pump."""
    kp = parametric_stiffness(geom, x_eq)
    return kp * osc.q / (2.0 * osc.k_m)


def frequency_tuning_capacitive(
    osc: OscillatorParams, geom: CapacitorGeometry, x_eq=0.0, vdc=None
):
    """Softened resonance Omega_m sqrt(1 - C''(x_eq) V_DC^2 / (2 k_m)) [rad/s].

    Raises SofteningCollapseError when the bias cancels the mechanical
    stiffness (radicand <= 0).
    """
    v = geom.vdc if vdc is None else vdc
    radicand = 1.0 - cap_curvature(x_eq, geom) * v**2 / (2.0 * osc.k_m)
    if radicand <= 0.0:
        raise SofteningCollapseError(
            f"V_DC = {v:.6g} V softens the resonance away entirely"
        )
    return osc.omega_m * math.sqrt(radicand)


def frequency_tuning_piezo(osc: OscillatorParams, tuning: PiezoTuning, vdc):
    """Linearly tuned resonance Omega_m + 2 pi slope V_DC [rad/s]."""
    return osc.omega_m + 2.0 * math.pi * tuning.slope_hz_per_volt * vdc


def static_equilibrium(osc: OscillatorParams, geom: CapacitorGeometry, vdc=None):
    """Stable static displacement under the DC bias.

    Solves k_m x = C'(x) V_DC^2 / 2 on [0, d0) by bracketed root finding
    on the interval where the net restoring stiffness is positive.
    Raises PullInError when no stable equilibrium exists.
    """
    v = geom.vdc if vdc is None else vdc
    if v == 0.0:
        return 0.0

    k_m = osc.k_m

    def residual(x):
        return k_m * x - 0.5 * cap_gradient(x, geom) * v**2

    # net stiffness k_m - C'' V^2 / 2 vanishes at x_soft; beyond it the
    # electrostatic pull stiffens faster than the spring and any root is
    # unstable.  (d0 - x_soft)^3 = alpha V^2 / k_m.
    x_soft = geom.d0 - (geom.alpha * v**2 / k_m) ** (1.0 / 3.0)
    if x_soft <= 0.0 or residual(x_soft) < 0.0:
        raise PullInError(
            f"V_DC = {v:.6g} V beyond pull-in: no stable equilibrium in the gap"
        )
    # residual(0) = -C'(0) V^2 / 2 < 0 <= residual(x_soft): root bracketed.
    x_eq = brentq(residual, 0.0, x_soft, xtol=1e-18, rtol=1e-14)
    return x_eq


def pull_in_voltage(osc: OscillatorParams, geom: CapacitorGeometry):
    """Largest DC bias with a stable equilibrium, by bisection on V."""

    def stable(v):
        try:
            static_equilibrium(osc, geom, vdc=v)
            return True
        except PullInError:
            return False

    lo, hi = 0.0, 1.0
    while stable(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e9:
            raise RuntimeError("pull-in voltage search did not terminate")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SqueezingMapResult:
    """Predicted squeezing over a (V_DC, V_p) grid.

    Arrays are shaped (len(vdc), len(vp)).  squeezing_db holds
    10 log10(1 + g_s), the thermal-variance suppression of the squeezed
    quadrature; cells that pull in or soften past collapse carry NaN and
    an explanatory flag ('ok' | 'pullin' | 'softening').
    """

    vdc: np.ndarray
    vp: np.ndarray
    x_eq: np.ndarray
    gs: np.ndarray
    squeezing_db: np.ndarray
    flags: np.ndarray


def squeezing_map(
    osc: OscillatorParams, geom: CapacitorGeometry, vdc_values, vp_values
) -> SqueezingMapResult:
    """Evaluate the achievable squeezing over a bias/pump grid.

    Per cell: solve the static equilibrium at V_DC, evaluate
    g_s = V_p / V_th(x_eq), store 10 log10(1 + g_s).  In the strong
    squeezing limit the squeezed variance scales as d0^3 / (V_DC V_p Q).
    """
    vdc_values = np.asarray(vdc_values, dtype=float)
    vp_values = np.asarray(vp_values, dtype=float)
    shape = (vdc_values.size, vp_values.size)
    x_eq = np.full(shape, np.nan)
    gs = np.full(shape, np.nan)
    db = np.full(shape, np.nan)
    flags = np.full(shape, "ok", dtype=object)

    for i, vdc in enumerate(vdc_values):
        try:
            xe = static_equilibrium(osc, geom, vdc=vdc)
            # reject biases that soften the resonance past collapse even
            # when a static equilibrium formally survives
            frequency_tuning_capacitive(osc, geom, x_eq=xe, vdc=vdc)
        except PullInError:
            flags[i, :] = "pullin"
            continue
        except SofteningCollapseError:
            flags[i, :] = "softening"
            continue
        x_eq[i, :] = xe
        if vdc == 0.0:
            gs[i, :] = 0.0
            db[i, :] = 0.0
            continue
        vth = threshold_voltage(osc, geom, x_eq=xe, vdc=vdc)
        gs[i, :] = vp_values / vth
        db[i, :] = 10.0 * np.log10(1.0 + gs[i, :])
    return SqueezingMapResult(
        vdc=vdc_values, vp=vp_values, x_eq=x_eq, gs=gs, squeezing_db=db, flags=flags
    )
