"""Spectral estimation and model fitting for measured/simulated traces.

Estimated spectra are single-sided in Hz (units m^2/Hz for displacement
traces), in contrast with the double-sided angular-frequency model
spectra of the analytic module; summing values * df recovers the trace
variance.  The Lorentzian peak model used throughout is the area form

    S(f) = floor + (2/pi) area (gamma/2) / ((f - c)^2 + (gamma/2)^2)

with gamma the full width at half maximum in Hz.  For a peak centred
near zero frequency on a single-sided spectrum the `area` parameter
equals the variance carried by the peak, which is how quadrature
variances are extracted without the near-carrier bins (coherent drive
residue, in-loop noise) that have to be excluded from the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import welch

from .errors import (
    DegenerateSpectrumError,
    FitError,
    InsufficientDataError,
)


@dataclass
class Spectrum:
    """Single-sided PSD estimate on the grid f_k = k df."""

    df: float
    values: np.ndarray
    n_averages: int
    window: str

    @property
    def frequencies(self):
        return np.arange(self.values.size) * self.df


def welch_psd(samples, dt, segment_length, overlap_fraction=0.5, window="hann",
              detrend="constant"):
    """Averaged-periodogram PSD of a uniformly sampled trace.

    Hann-windowed (by default) segments with fractional overlap, mean
    removed per segment (pass detrend=False for traces that are zero
    mean by construction, where removal only dents the lowest bins),
    window-power normalized, single-sided density scaling.  Requires at
    least one full segment.
    """
    samples = np.asarray(samples, dtype=float)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if segment_length < 4:
        raise ValueError(f"segment_length must be >= 4, got {segment_length}")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    if samples.size < segment_length:
        raise InsufficientDataError(
            f"trace of {samples.size} samples shorter than one segment "
            f"({segment_length})"
        )
    noverlap = int(segment_length * overlap_fraction)
    freqs, values = welch(
        samples,
        fs=1.0 / dt,
        window=window,
        nperseg=segment_length,
        noverlap=noverlap,
        detrend=detrend,
        scaling="density",
        return_onesided=True,
    )
    step = segment_length - noverlap
    n_averages = 1 + (samples.size - segment_length) // step
    return Spectrum(
        df=float(freqs[1] - freqs[0]),
        values=values,
        n_averages=int(n_averages),
        window=window,
    )


@dataclass
class LorentzianFit:
    """Fitted peak parameters; frequencies in Hz, gamma the FWHM.

    `covariance` is the 4x4 least-squares covariance in the parameter
    order (center, gamma, area, floor); the *_sigma properties are the
    square roots of its diagonal.
    """

    center: float
    gamma: float
    area: float
    floor: float
    covariance: np.ndarray = field(repr=False)
    n_excluded: int = 0
    n_used: int = 0

    @property
    def center_sigma(self):
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def gamma_sigma(self):
        return float(np.sqrt(max(self.covariance[1, 1], 0.0)))

    @property
    def area_sigma(self):
        return float(np.sqrt(max(self.covariance[2, 2], 0.0)))

    @property
    def floor_sigma(self):
        return float(np.sqrt(max(self.covariance[3, 3], 0.0)))


def lorentzian_model(f, center, gamma, area, floor):
    """Area-form Lorentzian on a noise floor; gamma is the FWHM."""
    hw = gamma / 2.0
    return floor + (2.0 / math.pi) * area * hw / ((f - center) ** 2 + hw**2)


def _initial_guess(freqs, values):
    """Robust starting point: center at the peak bin, floor from the
    median of the outer frequency quartiles, width at half height, area
    from the trapezoidal integral above the floor."""
    order = np.argsort(freqs)
    f, v = freqs[order], values[order]
    q = max(1, f.size // 4)
    outer = np.concatenate([v[:q], v[-q:]])
    floor0 = float(np.median(outer))
    i_peak = int(np.argmax(v))
    height = v[i_peak] - floor0
    noise = float(np.std(outer))
    if height <= 0 or height <= 3.0 * noise:
        raise DegenerateSpectrumError(
            f"no peak above the floor at 3 sigma (height {height:.3g}, "
            f"noise {noise:.3g})"
        )
    center0 = float(f[i_peak])
    above = v - floor0 > height / 2.0
    idx = np.flatnonzero(above)
    gamma0 = float(f[idx[-1]] - f[idx[0]]) if idx.size else 0.0
    if gamma0 <= 0:
        gamma0 = 2.0 * float(np.median(np.diff(f)))
    area0 = float(np.trapezoid(np.clip(v - floor0, 0.0, None), f))
    if area0 <= 0:
        area0 = height * gamma0
    return center0, gamma0, area0, max(floor0, 0.0)


def lorentzian_fit(spectrum=None, exclude_halfwidth=0.0, freqs=None, values=None):
    """Fit the area-form Lorentzian to a spectrum.

    Bins within `exclude_halfwidth` [Hz] of the initial center estimate
    are removed before fitting (coherent-tone / in-loop residue).  The
    fit needs >= 20 usable bins within 10 widths of the center.  Raises
    DegenerateSpectrumError when no peak stands clear of the floor,
    FitError when the least-squares solver fails to converge.
    """
    if freqs is None:
        if spectrum is None:
            raise ValueError("provide a Spectrum or freqs/values arrays")
        freqs = spectrum.frequencies
        values = spectrum.values
    freqs = np.asarray(freqs, dtype=float)
    values = np.asarray(values, dtype=float)
    center0, gamma0, area0, floor0 = _initial_guess(freqs, values)
    keep = np.abs(freqs - center0) >= exclude_halfwidth
    n_excluded = int((~keep).sum())
    f_fit, v_fit = freqs[keep], values[keep]
    local = np.abs(f_fit - center0) <= 10.0 * max(gamma0, exclude_halfwidth)
    if local.sum() < 20:
        raise InsufficientDataError(
            f"only {int(local.sum())} bins near the peak after exclusion; need >= 20"
        )
    # re-derive height-based guesses from the surviving bins
    try:
        center0, gamma0, area0, floor0 = _initial_guess(f_fit, v_fit)
    except DegenerateSpectrumError:
        pass  # peak core excluded; keep the original moments
    # fit in shifted/scaled coordinates: SI PSD values sit tens of orders
    # below the frequency axis and wreck the trust-region conditioning
    f_scale = max(gamma0, float(np.median(np.diff(np.sort(f_fit)))))
    v_scale = float(v_fit.max())
    if v_scale <= 0:
        raise DegenerateSpectrumError("spectrum is non-positive everywhere")
    fs = (f_fit - center0) / f_scale
    vs = v_fit / v_scale
    p0 = [0.0, gamma0 / f_scale, area0 / (v_scale * f_scale),
          floor0 / v_scale]
    span = float(fs.max() - fs.min())
    lower = [fs.min() - span, 1e-12, 0.0, 0.0]
    upper = [fs.max() + span, np.inf, np.inf, np.inf]
    try:
        popt, pcov = curve_fit(
            lorentzian_model, fs, vs, p0=p0, bounds=(lower, upper),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"Lorentzian fit did not converge: {exc}") from exc
    if not np.all(np.isfinite(popt)):
        raise FitError("Lorentzian fit returned non-finite parameters")
    # map parameters and covariance back to physical units
    jac = np.diag([f_scale, f_scale, v_scale * f_scale, v_scale])
    pcov_phys = jac @ np.asarray(pcov, dtype=float) @ jac
    return LorentzianFit(
        center=float(center0 + popt[0] * f_scale),
        gamma=float(popt[1] * f_scale),
        area=float(popt[2] * v_scale * f_scale),
        floor=float(popt[3] * v_scale),
        covariance=pcov_phys,
        n_excluded=n_excluded,
        n_used=int(f_fit.size),
    )


def variance_from_fit(fit: LorentzianFit):
    """Variance carried by the fitted peak: the area parameter, by the
    normalization of the area-form model on a single-sided spectrum.
    The floor (imprecision/background) is excluded by construction."""
    return fit.area


@dataclass
class ThresholdFit:
    """Pump-voltage threshold extracted from a sweep."""

    vth: float
    vth_sigma: float
    scale: float
    scale_sigma: float
    model: str


THRESHOLD_MODELS = ("variance", "gain_deamp", "gain_amp")


def fit_threshold(vp_values, y_values, model="variance"):
    """Extract the parametric threshold voltage from a pump sweep.

    model = 'variance'   : y = 1 / (1 + vp / vth)    (normalized, no scale)
            'gain_deamp' : y = s / (1 + vp / vth)
            'gain_amp'   : y = s / (1 - vp / vth)    (only defined below vth)

    Needs >= 5 points.  Returns the fitted vth with its 1-sigma
    uncertainty (and the scale for the gain models).
    """
    if model not in THRESHOLD_MODELS:
        raise ValueError(f"model must be one of {THRESHOLD_MODELS}, got {model!r}")
    vp = np.asarray(vp_values, dtype=float)
    y = np.asarray(y_values, dtype=float)
    if vp.size != y.size:
        raise ValueError("vp_values and y_values must have equal length")
    if vp.size < 5:
        raise InsufficientDataError(f"need >= 5 sweep points, got {vp.size}")
    vmax = float(vp.max())
    # the gain models fit y in units of its own maximum: squeezed-gain
    # sweeps arrive in SI (1e-22 m^2) where the solver's default scaling
    # stalls; the variance model is normalized by contract
    y_scale = 1.0
    if model != "variance":
        y_scale = float(np.max(np.abs(y)))
        if y_scale <= 0:
            raise FitError("threshold fit needs non-zero sweep values")
    ys = y / y_scale
    if model == "variance":

        def fun(v, vth):
            return 1.0 / (1.0 + v / vth)

        p0, lo, hi = [max(np.median(vp), 1e-12)], [1e-300], [np.inf]
    elif model == "gain_deamp":

        def fun(v, vth, s):
            return s / (1.0 + v / vth)

        p0 = [max(np.median(vp), 1e-12), max(ys.max(), 1e-12)]
        lo, hi = [1e-300, 0.0], [np.inf, np.inf]
    else:  # gain_amp: diverges at vth, so vth must sit above the data
        def fun(v, vth, s):
            return s / (1.0 - v / vth)

        p0 = [vmax * 1.5, max(ys.min(), 1e-12)]
        lo, hi = [vmax * (1.0 + 1e-9), 0.0], [np.inf, np.inf]
    try:
        popt, pcov = curve_fit(fun, vp, ys, p0=p0, bounds=(lo, hi), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"threshold fit did not converge: {exc}") from exc
    with np.errstate(invalid="ignore"):
        perr = np.sqrt(np.diag(pcov))
    if model == "variance":
        return ThresholdFit(
            vth=float(popt[0]), vth_sigma=float(perr[0]),
            scale=1.0, scale_sigma=0.0, model=model,
        )
    return ThresholdFit(
        vth=float(popt[0]), vth_sigma=float(perr[0]),
        scale=float(popt[1] * y_scale), scale_sigma=float(perr[1] * y_scale),
        model=model,
    )


def allan_deviation(freq_samples, f0, taus, sample_rate):
    """Non-overlapping Allan deviation of a frequency record.

    For averaging time tau (an integer multiple of the sample interval)
    the record is cut into N contiguous bins of mean frequency fbar_n and

        sigma_A(tau) = sqrt( 1/(2 (N-1)) sum_n (fbar_{n+1} - fbar_n)^2 ) / f0

    A constant record gives exactly 0; pure white frequency noise falls
    as tau^-1/2; a linear drift r [Hz/s] rises as r tau / (sqrt(2) f0).
    Each tau needs at least 3 bins.
    """
    f = np.asarray(freq_samples, dtype=float)
    if f0 <= 0:
        raise ValueError(f"f0 must be positive, got {f0}")
    if sample_rate <= 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    out = np.empty(len(taus))
    for k, tau in enumerate(taus):
        m_exact = tau * sample_rate
        m = int(round(m_exact))
        if m < 1 or abs(m_exact - m) > 1e-6 * max(m, 1):
            raise ValueError(
                f"tau = {tau} s is not an integer multiple of the sample interval"
            )
        n_bins = f.size // m
        if n_bins < 3:
            raise InsufficientDataError(
                f"tau = {tau} s leaves {n_bins} bins; need >= 3"
            )
        fbar = f[: n_bins * m].reshape(n_bins, m).mean(axis=1)
        diffs = np.diff(fbar)
        out[k] = math.sqrt(np.sum(diffs**2) / (2.0 * (n_bins - 1))) / f0
    return out
