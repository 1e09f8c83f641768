"""Monte-Carlo cross-check of the weight-series spectral prediction.

Synthesizes a Gaussian sequence with a prescribed spectrum, pushes it
sample-wise through the device curve, estimates the output spectrum by
averaged windowed periodograms, and compares against the prediction. The
sample-wise device is the same interpolated periodic extension the
prediction is built from, so the comparison isolates the series method
itself rather than differences between two device models.

The oracle is restricted to real (zero-phase) curves: a time-domain
simulation of an amplitude-dependent phase shift needs a complex-envelope
formalism that the real-signal pipeline deliberately avoids.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import spectrogram

from chfdist.chf_engine import compute_sdr, compute_weights
from chfdist.errors import DomainError, GridError, SaturationError
from chfdist.ingest import TransferCurve
from chfdist.nonlinearity import (
    build_periodic_extension,
    default_half_period,
    fourier_coefficients_from_samples,
    make_extension_evaluator,
)
from chfdist.spectrum_engine import Spectrum, integrate_power, predict_output_spectrum

logger = logging.getLogger(__name__)

MIN_SAMPLES = 256
MIN_SEGMENTS = 8

# Bins below this level relative to each spectrum's peak are not compared.
COMPARISON_FLOOR_DB = -60.0

# Raised-cosine estimator resolution: per-bin response to a continuous
# density, i.e. |0.5 sinc(d) + 0.25 sinc(d-1) + 0.25 sinc(d+1)|^2
# integrated over unit bins (the raw integrals total 3/8, the window's
# power normalization). Applied to predictions so estimator resolution
# does not read as model error.
HANN_RESOLUTION_KERNEL = np.array(
    [8.377e-05, 2.5995e-03, 1.968688e-01, 6.008983e-01,
     1.968688e-01, 2.5995e-03, 8.377e-05]
)
HANN_RESOLUTION_KERNEL = HANN_RESOLUTION_KERNEL / HANN_RESOLUTION_KERNEL.sum()


@dataclass(frozen=True, slots=True)
class OracleConfig:
    """Deterministic synthesis and estimation setup.

    Attributes:
        seed: Root RNG seed; every segment derives its own child stream.
        n_samples: Segment length, a power of two >= 256. The implied
            sampling rate is n_samples * target.f_step_hz, which puts the
            target bins exactly on analysis bins.
        n_segments: Independent segments to average, >= 8.
        target: Unit-area input spectrum on the analysis grid.
        sigma: Target RMS of the synthesized signal in volts.
    """

    seed: int
    n_samples: int
    n_segments: int
    target: Spectrum
    sigma: float

    def __post_init__(self) -> None:
        n = self.n_samples
        if n < MIN_SAMPLES or n & (n - 1):
            raise DomainError(
                f"n_samples must be a power of two >= {MIN_SAMPLES}, got {n}"
            )
        if self.n_segments < MIN_SEGMENTS:
            raise DomainError(
                f"n_segments must be >= {MIN_SEGMENTS}, got {self.n_segments}"
            )
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if self.target.unit != "unit_area_density":
            raise DomainError("target spectrum must be a unit-area density")

    @property
    def sampling_rate_hz(self) -> float:
        """Implied sampling rate pinning target bins onto analysis bins."""
        return self.n_samples * self.target.f_step_hz

    def line_indices(self) -> np.ndarray:
        """Analysis-bin index of every target bin.

        Raises:
            GridError: target start not a whole number of bins.
            DomainError: target band reaching DC or the folding frequency.
        """
        ratio = self.target.f_start_hz / self.target.f_step_hz
        if abs(ratio - round(ratio)) > 1e-6:
            raise GridError(
                "target start frequency must be a whole multiple of the bin "
                f"spacing, got ratio {ratio!r}"
            )
        idx = int(round(ratio)) + np.arange(self.target.values.size)
        if idx[0] < 1 or idx[-1] >= self.n_samples // 2:
            raise DomainError(
                "target band must sit strictly between DC and half the "
                f"sampling rate; bins {idx[0]}..{idx[-1]} of {self.n_samples}"
            )
        return idx


@dataclass(frozen=True, slots=True)
class PsdEstimate:
    """Averaged periodogram with per-bin spread.

    Attributes:
        spectrum: One-sided power density on the analysis grid.
        variance: Per-bin variance of the individual periodograms.
        n_windows: Number of averaged windows.
        window: Window name behind the estimate.
    """

    spectrum: Spectrum
    variance: np.ndarray
    n_windows: int
    window: str = "hann"

    def __post_init__(self) -> None:
        var = np.asarray(self.variance, dtype=np.float64).copy()
        var.setflags(write=False)
        object.__setattr__(self, "variance", var)
        if var.shape != self.spectrum.values.shape:
            raise DomainError("variance must match the spectrum bin for bin")
        if np.any(var < 0):
            raise DomainError("per-bin variance must be >= 0")


@dataclass(frozen=True, slots=True)
class SpectraComparison:
    """Per-bin agreement summary between prediction and estimate."""

    max_delta_db: float
    mean_delta_db: float
    n_bins: int
    floor_db: float


def synthesize_gaussian_signal(cfg: OracleConfig) -> np.ndarray:
    """Gaussian sequence whose expected periodogram equals the target.

    One continuous circular realization spanning all segments: each target
    bin's power spreads uniformly over the fine spectral lines it covers,
    every line getting an independent complex Gaussian amplitude scaled so
    the expected sample variance is sigma^2. A continuous record keeps
    windowed estimates free of stitching leakage, the way a lab capture
    would be. Child stream j of the seed fills the j-th sub-line of every
    bin, so the draw is reproducible and order-independent.
    """
    idx = cfg.line_indices()
    n_total = cfg.n_samples * cfg.n_segments
    sub = cfg.n_segments
    # Per-bin power integrates to sigma^2; each bin splits it over `sub`
    # fine lines covering [f - df/2, f + df/2).
    line_power = cfg.sigma**2 * cfg.target.values * cfg.target.f_step_hz
    if not np.any(line_power > 0.0):
        raise DomainError("target spectrum carries no power")
    amplitude = n_total * np.sqrt(line_power / (2.0 * sub))
    base = idx * sub
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_segments)
    spec = np.zeros(n_total // 2 + 1, dtype=np.complex128)
    for j, child in enumerate(children):
        rng = np.random.default_rng(child)
        g = rng.standard_normal((2, idx.size))
        spec[base + (j - sub // 2)] = amplitude * (g[0] + 1j * g[1]) / math.sqrt(2.0)
    return np.fft.irfft(spec, n_total)


def apply_memoryless_nonlinearity(
    x: np.ndarray,
    curve: TransferCurve,
    c: float | None = None,
    strict: bool = False,
) -> np.ndarray:
    """Push samples through the device's interpolated periodic extension.

    Shares the evaluator used to build Fourier coefficients, so the
    simulated device and the modeled device are the same function.

    Args:
        x: Real sample sequence.
        curve: Zero-phase measured transfer curve.
        c: Half-period in volts; defaults to 4x the peak measured input.
        strict: Raise on samples beyond +/-c instead of clamping.

    Raises:
        DomainError: curve with nonzero phase (no passband AM-PM path).
        SaturationError: samples beyond +/-c in strict mode.
    """
    if not curve.is_real(tol=1e-12):
        raise DomainError(
            "time-domain oracle supports zero-phase curves only; AM-PM "
            "devices are validated through the series consistency checks"
        )
    if c is None:
        c = default_half_period(curve.v_max)
    x = np.asarray(x, dtype=np.float64)
    over = np.abs(x) > c
    n_over = int(np.count_nonzero(over))
    if n_over:
        worst = float(np.max(np.abs(x)))
        if strict:
            raise SaturationError(
                f"{n_over} of {x.size} samples exceed the extension domain "
                f"+/-{c} V (worst {worst:.4g} V)"
            )
        logger.warning(
            "clamping %d of %d samples to +/-%g V (worst %.4g V)",
            n_over,
            x.size,
            c,
            worst,
        )
        x = np.clip(x, -c, c)
    evaluate = make_extension_evaluator(curve, c)
    return np.ascontiguousarray(evaluate(x).real)


def estimate_psd(y: np.ndarray, cfg: OracleConfig) -> PsdEstimate:
    """Mean of raised-cosine windowed periodograms at 50% overlap.

    Scaled as a one-sided density: integrate_power of the result matches
    the mean-square of the sequence up to estimator leakage.

    Raises:
        DomainError: sequence length differing from n_samples * n_segments.
    """
    y = np.asarray(y, dtype=np.float64)
    expected = cfg.n_samples * cfg.n_segments
    if y.size != expected:
        raise DomainError(
            f"sequence length {y.size} does not match the configured "
            f"{cfg.n_segments} segments of {cfg.n_samples} samples"
        )
    freqs, _, per_window = spectrogram(
        y,
        fs=cfg.sampling_rate_hz,
        window="hann",
        nperseg=cfg.n_samples,
        noverlap=cfg.n_samples // 2,
        detrend=False,
        scaling="density",
        mode="psd",
    )
    psd = per_window.mean(axis=-1)
    var = per_window.var(axis=-1, ddof=1)
    spectrum = Spectrum(float(freqs[0]), cfg.target.f_step_hz, psd, "linear_power")
    return PsdEstimate(
        spectrum=spectrum, variance=var, n_windows=per_window.shape[-1]
    )


def compare_spectra(
    predicted: Spectrum,
    measured: PsdEstimate,
    band: tuple[float, float] | None = None,
    floor_db: float = COMPARISON_FLOOR_DB,
) -> SpectraComparison:
    """Per-bin dB agreement over bins where both spectra carry power.

    The estimate is interpolated onto the prediction grid; when the two
    grids share a bin spacing the prediction is first smeared with the
    window's power kernel so estimator resolution does not read as error.
    Bins below floor_db relative to either peak are skipped.

    Raises:
        DomainError: disjoint grids, or no comparable bins in the band.
    """
    pred_f = predicted.frequencies()
    pred_v = np.array(predicted.values)
    meas = measured.spectrum
    meas_f = meas.frequencies()
    same_spacing = (
        abs(meas.f_step_hz - predicted.f_step_hz) <= 1e-9 * predicted.f_step_hz
    )
    if measured.window == "hann" and same_spacing:
        pred_v = np.convolve(pred_v, HANN_RESOLUTION_KERNEL, mode="same")
    overlap = (pred_f >= meas_f[0] - 1e-9) & (pred_f <= meas_f[-1] + 1e-9)
    if not np.any(overlap):
        raise DomainError("prediction and estimate grids do not overlap")
    meas_v = np.interp(pred_f, meas_f, np.asarray(meas.values))
    mask = overlap
    if band is not None:
        lo, hi = band
        if hi < lo:
            raise DomainError(f"band limits are reversed: {band}")
        slack = 1e-9 * predicted.f_step_hz
        mask = mask & (pred_f >= lo - slack) & (pred_f <= hi + slack)
    floor = 10.0 ** (floor_db / 10.0)
    mask = mask & (pred_v > pred_v.max() * floor) & (meas_v > meas_v.max() * floor)
    if not np.any(mask):
        raise DomainError("no bins above the comparison floor in the band")
    delta = 10.0 * np.log10(meas_v[mask] / pred_v[mask])
    return SpectraComparison(
        max_delta_db=float(np.max(np.abs(delta))),
        mean_delta_db=float(np.mean(delta)),
        n_bins=int(np.count_nonzero(mask)),
        floor_db=floor_db,
    )


def oracle_sdr(x: np.ndarray, y: np.ndarray) -> float:
    """Moment-based SDR of a simulated run.

    The correlated gain is E[xy]/E[x^2]; everything in the output that is
    neither that scaled replica nor the DC offset counts as distortion,
    matching the series split of term powers.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p_in = float(np.mean(x * x))
    alpha = float(np.mean(x * y)) / p_in
    p_signal = alpha * alpha * p_in
    p_distortion = float(np.mean(y * y)) - float(np.mean(y)) ** 2 - p_signal
    if p_signal <= 0.0:
        return -math.inf
    if p_distortion <= 0.0:
        return math.inf
    return 10.0 * math.log10(p_signal / p_distortion)


def run_oracle(
    curve: TransferCurve,
    cfg: OracleConfig,
    c: float | None = None,
    n: int = 8001,
    mode: str = "same",
    k_max: int | None = None,
    band: tuple[float, float] | None = None,
    strict: bool = False,
) -> dict:
    """End-to-end cross-validation of one device at one drive level.

    Runs the simulation, builds the series prediction from the same curve,
    and reports per-bin and SDR agreement over the target band. The
    prediction is evaluated at the realized RMS of the synthesized
    sequence, mirroring the measurement workflow of predicting from the
    observed input power, so synthesis-level fluctuation around the target
    sigma does not read as model error.
    """
    if c is None:
        c = default_half_period(curve.v_max)
    x = synthesize_gaussian_signal(cfg)
    sigma_realized = float(np.std(x))
    y = apply_memoryless_nonlinearity(x, curve, c=c, strict=strict)
    estimate = estimate_psd(y, cfg)

    ext = build_periodic_extension(curve, c=c, n=n)
    coeffs = fourier_coefficients_from_samples(ext)
    weights = compute_weights(
        coeffs, sigma=sigma_realized, k_max=k_max, strict=strict
    )
    components = predict_output_spectrum(weights, cfg.target, mode=mode)

    if band is None:
        f = cfg.target.frequencies()
        band = (float(f[0]), float(f[-1]))
    comparison = compare_spectra(components.weighted_total, estimate, band=band)
    sdr_predicted = compute_sdr(weights)
    sdr_measured = oracle_sdr(x, y)
    return {
        "config": {
            "seed": cfg.seed,
            "n_samples": cfg.n_samples,
            "n_segments": cfg.n_segments,
            "sigma": cfg.sigma,
            "sigma_realized": sigma_realized,
            "target_f_start_hz": cfg.target.f_start_hz,
            "target_f_step_hz": cfg.target.f_step_hz,
            "target_bins": int(cfg.target.values.size),
            "c": c,
            "n": n,
            "mode": mode,
            "k_max": weights.k_max,
        },
        "sdr_predicted_db": sdr_predicted,
        "sdr_oracle_db": sdr_measured,
        "sdr_delta_db": sdr_predicted - sdr_measured,
        "max_delta_db": comparison.max_delta_db,
        "mean_delta_db": comparison.mean_delta_db,
        "compared_bins": comparison.n_bins,
        "band": [band[0], band[1]],
        "input_power_check": {
            "target_variance": cfg.sigma**2,
            "sample_variance": float(np.var(x)),
            "psd_integral": integrate_power(estimate.spectrum),
            "sample_mean_square": float(np.mean(y * y)),
        },
        "warnings": list(weights.diagnostics.warnings) + list(components.warnings),
    }
