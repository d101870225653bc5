"""Feedback-stabilized parametric squeezing of a mechanical oscillator.

Closed-form steady-state theory, stochastic time-domain simulation
(rotating-frame and full-position with lock-in + PLL), spectral
estimation, and capacitive-electrode design tools, with a CLI for
reproducible seeded experiments.
"""

from .analytic import (
    QuadratureVariances,
    SpectrumModel,
    amplitude_gain,
    classical_variances,
    detection_snr,
    homodyne_psd,
    optimal_feedback_gain,
    purity,
    quadrature_psd,
    quadrature_rates,
    quantum_variances,
    steady_state_amplitude,
    susceptibilities,
)
from .capdesign import (
    CapacitorGeometry,
    PiezoTuning,
    capacitance,
    frequency_tuning_capacitive,
    frequency_tuning_piezo,
    parametric_stiffness,
    pull_in_voltage,
    squeezing_map,
    static_equilibrium,
    threshold_voltage,
)
from .config import ExperimentConfig, config_from_dict, load_config, serialize_config
from .errors import (
    AliasingError,
    ConfigError,
    DegenerateSpectrumError,
    FitError,
    GapClosedError,
    InstabilityError,
    InsufficientDataError,
    LowQualityFactorWarning,
    MeasurementRequiredError,
    PullInError,
    SofteningCollapseError,
    SqueezesimError,
    StepSizeError,
    ThresholdError,
    UndefinedThresholdError,
)
from .model import (
    DriveConfig,
    FeedbackConfig,
    OscillatorParams,
    PllConfig,
    QuantumReadout,
    ThermalBath,
    classical_sigma0_sq,
    occupancy,
    resolve_gs,
    zero_point_amplitude,
)
from .simulate import (
    PositionTrace,
    QuadratureTrace,
    frequency_record,
    lockin_demodulate,
    pll_effective_gfb,
    rotating_frame_step_limit,
    run_pll,
    simulate_position,
    simulate_rotating,
)
from .spectral import (
    LorentzianFit,
    Spectrum,
    ThresholdFit,
    allan_deviation,
    fit_threshold,
    lorentzian_fit,
    lorentzian_model,
    variance_from_fit,
    welch_psd,
)
from .version import VERSION

__version__ = VERSION
