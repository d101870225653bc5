"""Typed error hierarchy.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps ConfigError to exit code 2 and the numerical errors
to exit code 3.
"""


class SqueezesimError(Exception):
    """Base class for all package errors."""


class ConfigError(SqueezesimError):
    """Invalid configuration input.

    `path` identifies the offending field, e.g. "oscillator.mass_ng".
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class InstabilityError(SqueezesimError):
    """Requested operating point lies on or beyond the parametric
    instability boundary 1 - g_s + g_fb <= 0."""


class ThresholdError(SqueezesimError):
    """Amplification gain requested at or beyond threshold (g_s >= 1)."""


class MeasurementRequiredError(SqueezesimError):
    """Feedback noise terms are undefined without a measurement channel
    (g_fb > 0 with g_meas = 0)."""


class GapClosedError(SqueezesimError):
    """Capacitor gap evaluated at or beyond contact (x >= d_0)."""


class PullInError(SqueezesimError):
    """No stable electrostatic equilibrium exists at the requested bias."""


class SofteningCollapseError(SqueezesimError):
    """Electrostatic spring softening cancels the mechanical stiffness;
    the shifted resonance is not defined."""


class UndefinedThresholdError(SqueezesimError):
    """Parametric threshold voltage is infinite (zero DC bias)."""


class StepSizeError(SqueezesimError):
    """Integration or sampling step too coarse for the requested dynamics."""


class AliasingError(SqueezesimError):
    """Requested decimation violates Nyquist for the chosen filter bandwidth."""


class InsufficientDataError(SqueezesimError):
    """Not enough samples / bins / points for the requested estimate."""


class FitError(SqueezesimError):
    """Nonlinear least squares failed to converge."""


class DegenerateSpectrumError(SqueezesimError):
    """Spectrum has no resolvable peak above the noise floor."""


class LowQualityFactorWarning(UserWarning):
    """Q below the regime where the two-quadrature rotating-frame model
    is a good description (rates no longer slow compared to the carrier)."""
