"""Parameter containers, derived quantities, and thermal occupancy."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from squeezesim.constants import HBAR, KBOLTZ
from squeezesim.errors import LowQualityFactorWarning, MeasurementRequiredError
from squeezesim.model import (
    DriveConfig,
    OscillatorParams,
    QuantumReadout,
    ThermalBath,
    classical_sigma0_sq,
    occupancy,
    resolve_gs,
    zero_point_amplitude,
)

OMEGA_1MHZ = 2.0 * math.pi * 1.0e6
MASS_30NG = 30e-12  # 30 ng in kg


def test_occupancy_zero_temperature():
    assert occupancy(0.0, OMEGA_1MHZ) == 0.0


def test_occupancy_10k_1mhz():
    # frozen reference value, direct Bose-Einstein evaluation
    assert occupancy(10.0, OMEGA_1MHZ) == pytest.approx(
        208365.69136134567, rel=1e-12
    )


def test_occupancy_ln2_point():
    # hbar*omega/(kB*T) = ln 2 makes the exponential exactly 2
    t = HBAR * OMEGA_1MHZ / (KBOLTZ * math.log(2.0))
    assert occupancy(t, OMEGA_1MHZ) == pytest.approx(1.0, rel=1e-12)


def test_occupancy_classical_limit():
    # high-T expansion: nbar -> kB T / (hbar Omega) - 1/2 + O(hbar Omega / kB T)
    t = 300.0
    classical = KBOLTZ * t / (HBAR * OMEGA_1MHZ)
    assert occupancy(t, OMEGA_1MHZ) == pytest.approx(classical - 0.5, rel=1e-6)


@given(
    t1=st.floats(0.01, 1e4),
    t2=st.floats(0.01, 1e4),
    w1=st.floats(1e3, 1e10),
    w2=st.floats(1e3, 1e10),
)
def test_occupancy_monotonic(t1, t2, w1, w2):
    if t1 > t2:
        t1, t2 = t2, t1
    if w1 > w2:
        w1, w2 = w2, w1
    assert occupancy(t1, w1) <= occupancy(t2, w1)
    assert occupancy(t2, w2) <= occupancy(t2, w1)


def test_zero_point_amplitude_30ng_1mhz():
    assert zero_point_amplitude(MASS_30NG, OMEGA_1MHZ) == pytest.approx(
        5.288987261611806e-16, rel=1e-12
    )


def test_zero_point_amplitude_mass_scaling():
    x1 = zero_point_amplitude(MASS_30NG, OMEGA_1MHZ)
    x4 = zero_point_amplitude(4.0 * MASS_30NG, OMEGA_1MHZ)
    assert x4 == pytest.approx(x1 / 2.0, rel=1e-12)


def test_classical_sigma0_sq_value():
    v = classical_sigma0_sq(300.0, MASS_30NG, 2.0 * math.pi * 1.3e6)
    assert v == pytest.approx(2.0693637703344674e-24, rel=1e-12)


def test_classical_sigma0_zero_temperature():
    assert classical_sigma0_sq(0.0, MASS_30NG, OMEGA_1MHZ) == 0.0


def test_sigma0_vs_occupancy_consistency():
    # sigma0^2 / x_zpf^2 = (kB T)/(hbar Omega / 2) approaches 2 nbar + 1
    osc = OscillatorParams(mass=MASS_30NG, omega_m=OMEGA_1MHZ, gamma_m=1.0)
    bath = ThermalBath(temperature=300.0)
    nbar = bath.occupancy(osc)
    ratio = bath.sigma0_sq(osc) / osc.x_zpf**2
    assert ratio == pytest.approx(2.0 * nbar + 1.0, rel=1.0 / (2.0 * nbar))


def test_oscillator_q_gamma_identity():
    osc = OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=2.8e7)
    assert osc.q * osc.gamma_m == pytest.approx(osc.omega_m, rel=1e-15)
    assert osc.q == pytest.approx(2.8e7, rel=1e-15)


def test_oscillator_spring_constant():
    osc = OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=1e8)
    assert osc.k_m == pytest.approx(1184.352528130723, rel=1e-12)


def test_oscillator_low_q_warning():
    with pytest.warns(LowQualityFactorWarning):
        OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=50.0)


@pytest.mark.parametrize("bad", [dict(mass=0.0), dict(omega_m=-1.0), dict(gamma_m=0.0)])
def test_oscillator_rejects_nonpositive(bad):
    kw = dict(mass=MASS_30NG, omega_m=OMEGA_1MHZ, gamma_m=1.0)
    kw.update(bad)
    with pytest.raises(ValueError):
        OscillatorParams(**kw)


def test_bath_rejects_negative_temperature():
    with pytest.raises(ValueError):
        ThermalBath(temperature=-1.0)


def test_drive_phase_restricted():
    DriveConfig(phi_p=0.0)
    DriveConfig(phi_p=math.pi / 2)
    DriveConfig(phi_p=-math.pi / 2)
    with pytest.raises(ValueError):
        DriveConfig(phi_p=0.3)


def test_drive_operating_point():
    assert DriveConfig(phi_p=0.0).operating_point == "deamplify"
    assert DriveConfig(phi_p=math.pi / 2).operating_point == "amplify"


def test_resolve_gs_from_kp():
    osc = OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=1e4)
    gs = 2.5
    kp = gs * 2.0 * osc.k_m / osc.q
    assert resolve_gs(DriveConfig(kp=kp), osc) == pytest.approx(gs, rel=1e-12)
    # both present and consistent
    assert resolve_gs(DriveConfig(gs=gs, kp=kp), osc) == gs


def test_resolve_gs_inconsistent_pair_raises():
    osc = OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=1e4)
    with pytest.raises(ValueError):
        resolve_gs(DriveConfig(gs=1.0, kp=1.0), osc)


def test_resolve_gs_defaults_to_zero():
    osc = OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=1e4)
    assert resolve_gs(DriveConfig(), osc) == 0.0


@given(gs=st.floats(0.0, 1e3), q=st.floats(1e2, 1e9))
@settings(max_examples=50)
def test_resolve_gs_round_trip(gs, q):
    osc = OscillatorParams.from_q(mass=MASS_30NG, omega_m=OMEGA_1MHZ, q=q)
    kp = gs * 2.0 * osc.k_m / osc.q
    assert resolve_gs(DriveConfig(gs=gs, kp=kp), osc) == gs


def test_readout_g_meas():
    r = QuantumReadout(gamma_qba=2.0, eta_det=0.77)
    assert r.g_meas == pytest.approx(1.54, rel=1e-15)


def test_readout_from_cavity():
    osc = OscillatorParams(mass=MASS_30NG, omega_m=OMEGA_1MHZ, gamma_m=1.0)
    r = QuantumReadout.from_cavity(g=100.0, kappa=1e4, osc=osc, eta_det=0.5)
    assert r.gamma_qba == pytest.approx(4.0 * 100.0**2 / 1e4, rel=1e-12)


def test_readout_eta_bounds():
    with pytest.raises(ValueError):
        QuantumReadout(gamma_qba=1.0, eta_det=0.0)
    with pytest.raises(ValueError):
        QuantumReadout(gamma_qba=1.0, eta_det=1.2)


def test_readout_feedback_requires_measurement():
    r = QuantumReadout(gamma_qba=0.0, eta_det=1.0)
    with pytest.raises(MeasurementRequiredError):
        r.require_measurement(1.0)
    r.require_measurement(0.0)  # no feedback, no requirement
