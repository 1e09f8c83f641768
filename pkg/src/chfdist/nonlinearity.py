"""Periodic extension of a voltage transfer function and its Fourier series.

A memoryless device measured on [0, v_max] becomes an odd function of period
2c: linear through the origin below the first measured point, monotone cubic
interpolation across the measured span, a saturation plateau above it, and a
half-cosine taper to zero at the period edge so the odd periodic function
stays continuous (a jump there would slow coefficient decay to O(1/lambda)).
The Fourier coefficients of that extension feed the weight series.

Key functionality:
    - make_extension_evaluator: shared interpolation/reflection rule, used
      both to sample the grid here and to drive time-domain samples in the
      Monte-Carlo oracle
    - build_periodic_extension / analytic_model_samples: grid sampling
    - fourier_coefficients_from_samples / hard_limiter_coefficients
    - reconstruct: truncated-series evaluation for diagnostics
    - save_coefficients / load_coefficients: JSON persistence
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from chfdist.errors import DomainError, ParseError
from chfdist.ingest import TransferCurve

logger = logging.getLogger(__name__)

DEFAULT_N = 8001

# Fraction of the headroom span (v_max, c] used by the taper to zero.
TAPER_FRACTION = 0.1

ANALYTIC_MODELS = ("signum", "scaled_tanh", "odd_polynomial")


@dataclass(frozen=True, slots=True)
class PeriodicExtension:
    """Samples of a 2c-periodic extension on the grid x_n = 2c*n/N - c.

    Attributes:
        c: Half-period in volts.
        n: Sample count, odd so the harmonic index stays symmetric.
        samples: Complex p(x_n) for n = 0..N-1.
        extension_meta: How the headroom region was constructed.
    """

    c: float
    n: int
    samples: np.ndarray
    extension_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.complex128).copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.c <= 0:
            raise DomainError(f"half-period must be > 0, got {self.c}")
        if self.n % 2 == 0 or self.n < 3:
            raise DomainError(f"sample count must be odd and >= 3, got {self.n}")
        if samples.size != self.n:
            raise DomainError(
                f"got {samples.size} samples for declared n = {self.n}"
            )
        if not np.all(np.isfinite(samples)):
            raise DomainError("extension samples must be finite")

    def grid(self) -> np.ndarray:
        """Sample abscissae x_n = 2c*n/N - c (includes -c, excludes +c)."""
        return extension_grid(self.c, self.n)


@dataclass(frozen=True, slots=True)
class FourierCoefficients:
    """Complex F_lambda of a periodic extension, lambda ascending.

    Attributes:
        c: Half-period in volts.
        n: Length N; lambda runs -(N-1)/2 .. (N-1)/2.
        coeffs: F_lambda in ascending lambda order.
        recon_error: Stored diagnostic, max relative reconstruction error
            over probed grid points (None for analytic coefficient sets).
    """

    c: float
    n: int
    coeffs: np.ndarray
    recon_error: float | None = None

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.complex128).copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.n % 2 == 0 or self.n < 3:
            raise DomainError(f"length must be odd and >= 3, got {self.n}")
        if coeffs.size != self.n:
            raise DomainError(
                f"got {coeffs.size} coefficients for declared n = {self.n}"
            )

    def lambdas(self) -> np.ndarray:
        """Harmonic indices -(N-1)/2 .. (N-1)/2."""
        half = (self.n - 1) // 2
        return np.arange(-half, half + 1)

    def at(self, lam: int) -> complex:
        """F_lambda by harmonic index."""
        half = (self.n - 1) // 2
        if abs(lam) > half:
            raise DomainError(f"harmonic index {lam} outside +/-{half}")
        return complex(self.coeffs[lam + half])


def extension_grid(c: float, n: int) -> np.ndarray:
    """Uniform grid x_n = 2c*n/N - c for n = 0..N-1 (N odd, so 0 is excluded)."""
    return 2.0 * c * np.arange(n) / n - c


def default_half_period(v_max: float) -> float:
    """Half-period giving generous headroom: 4x the peak drive, 0.1 V steps."""
    c = round(4.0 * v_max, 1)
    return c if c >= v_max else 4.0 * v_max


def make_extension_evaluator(
    curve: TransferCurve, c: float
) -> Callable[[np.ndarray], np.ndarray]:
    """Build the evaluator of the odd 2c-periodic extension of a device.

    The returned callable maps voltages in [-c, c] to complex outputs:
    linear through the origin below the first measured point, monotone
    cubic interpolation of magnitude and unwrapped phase across the
    measured span, plateau at the last measured output above it, and a
    half-cosine taper to zero over the final 10% of the headroom so the
    odd reflection is continuous at +/-c.

    This is the single interpolation rule shared by grid sampling here and
    by sample-wise application in the Monte-Carlo oracle.

    Raises:
        DomainError: c smaller than the largest measured input.
    """
    v_max = curve.v_max
    if c < v_max:
        raise DomainError(
            f"half-period {c} V is smaller than the measured span {v_max} V"
        )
    v_meas = curve.v_in[1:]
    w_meas = curve.v_out[1:]
    v_first = float(v_meas[0])
    gain_first = complex(w_meas[0]) / v_first
    plateau = complex(w_meas[-1])

    if v_meas.size >= 2:
        mag_interp = PchipInterpolator(v_meas, np.abs(w_meas))
        phase_interp = PchipInterpolator(v_meas, np.unwrap(np.angle(w_meas)))

        def measured(x: np.ndarray) -> np.ndarray:
            return mag_interp(x) * np.exp(1j * phase_interp(x))

    else:

        def measured(x: np.ndarray) -> np.ndarray:
            return np.full(x.shape, plateau)

    headroom = c - v_max
    taper_width = TAPER_FRACTION * headroom
    taper_start = c - taper_width

    def positive_half(x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape, dtype=np.complex128)
        entry = x < v_first
        span = (~entry) & (x <= v_max)
        flat = (x > v_max) & (x <= taper_start)
        taper = x > taper_start
        out[entry] = gain_first * x[entry]
        out[span] = measured(x[span])
        out[flat] = plateau
        if taper_width > 0.0:
            phase = np.pi * (x[taper] - taper_start) / taper_width
            out[taper] = plateau * 0.5 * (1.0 + np.cos(phase))
        else:
            out[taper] = plateau
        return out

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if np.any(np.abs(x) > c):
            worst = float(np.max(np.abs(x)))
            raise DomainError(
                f"input {worst} V outside the extension domain +/-{c} V"
            )
        out = np.empty(x.shape, dtype=np.complex128)
        neg = x < 0
        out[~neg] = positive_half(x[~neg])
        out[neg] = -positive_half(-x[neg])
        return out

    return evaluate


def build_periodic_extension(
    curve: TransferCurve, c: float | None = None, n: int = DEFAULT_N
) -> PeriodicExtension:
    """Sample the odd periodic extension of a measured device on the grid.

    Args:
        curve: Measured transfer curve starting at the origin.
        c: Half-period in volts; defaults to 4x the peak measured input.
        n: Odd sample count.

    Raises:
        DomainError: c < v_max (period too small) or even n.
    """
    if c is None:
        c = default_half_period(curve.v_max)
    if n % 2 == 0:
        raise DomainError(f"sample count must be odd, got {n}")
    evaluate = make_extension_evaluator(curve, c)
    samples = evaluate(extension_grid(c, n))
    v_max = curve.v_max
    meta: dict = {
        "construction": "linear-entry + monotone-cubic + plateau + cosine-taper",
        "source": curve.label,
        "v_first": float(curve.v_in[1]),
        "v_max": v_max,
        "plateau": [float(curve.v_out[-1].real), float(curve.v_out[-1].imag)],
    }
    if c > v_max:
        meta["taper_start"] = c - TAPER_FRACTION * (c - v_max)
    else:
        meta["construction"] = "linear-entry + monotone-cubic (no headroom)"
    return PeriodicExtension(c=c, n=n, samples=samples, extension_meta=meta)


def analytic_model_samples(
    model: str, c: float, n: int = DEFAULT_N, **params: float
) -> PeriodicExtension:
    """Sample a parametric odd device model on the extension grid.

    Models:
        signum: sgn(x); the sample at x = -c takes the jump midpoint 0.
        scaled_tanh(gain, v_sat): v_sat * tanh(gain * x / v_sat).
        odd_polynomial(a1, a3, a5): a1*x + a3*x**3 + a5*x**5.

    Raises:
        DomainError: unknown model, non-finite parameter, or even n.
    """
    if n % 2 == 0:
        raise DomainError(f"sample count must be odd, got {n}")
    if any(not math.isfinite(v) for v in params.values()):
        raise DomainError(f"model parameters must be finite, got {params}")
    x = extension_grid(c, n)
    if model == "signum":
        if params:
            raise DomainError(f"signum takes no parameters, got {params}")
        samples = np.sign(x)
    elif model == "scaled_tanh":
        gain = params.pop("gain", 1.0)
        v_sat = params.pop("v_sat", 1.0)
        if params:
            raise DomainError(f"unknown scaled_tanh parameters {params}")
        if v_sat <= 0:
            raise DomainError(f"v_sat must be > 0, got {v_sat}")
        samples = v_sat * np.tanh(gain * x / v_sat)
    elif model == "odd_polynomial":
        a1 = params.pop("a1", 0.0)
        a3 = params.pop("a3", 0.0)
        a5 = params.pop("a5", 0.0)
        if params:
            raise DomainError(f"unknown odd_polynomial parameters {params}")
        samples = a1 * x + a3 * x**3 + a5 * x**5
    else:
        raise DomainError(
            f"unknown model {model!r}, expected one of {ANALYTIC_MODELS}"
        )
    # x_0 = -c sits on the periodic seam, where an odd extension jumps from
    # f(c) to -f(c); the series converges to the midpoint 0 there, and the
    # midpoint keeps the sample sequence exactly antisymmetric.
    samples[0] = 0.0
    meta = {"construction": "analytic", "model": model, **params}
    if model == "scaled_tanh":
        meta.update(gain=gain, v_sat=v_sat)
    elif model == "odd_polynomial":
        meta.update(a1=a1, a3=a3, a5=a5)
    return PeriodicExtension(c=c, n=n, samples=samples, extension_meta=meta)


def fourier_coefficients_from_samples(ext: PeriodicExtension) -> FourierCoefficients:
    """Fourier coefficients of the extension via a length-N DFT.

    The grid starts at x = -c, so the plain DFT bin is rotated to the x = 0
    phase reference by the exact factor (-1)**lambda; bins are folded to
    harmonic indices lambda in [-(N-1)/2, (N-1)/2]. Exact for harmonics on
    the grid. Stores a reconstruction-error diagnostic probed on a subset
    of grid points.
    """
    n = ext.n
    half = (n - 1) // 2
    spectrum = np.fft.fft(ext.samples)
    lam = np.arange(-half, half + 1)
    signs = 1.0 - 2.0 * (np.abs(lam) % 2)
    coeffs = signs * spectrum[lam % n] / n

    probe = FourierCoefficients(c=ext.c, n=n, coeffs=coeffs)
    probe_idx = np.unique(np.linspace(0, n - 1, min(n, 257)).astype(int))
    recon = reconstruct(probe, ext.grid()[probe_idx])
    scale = float(np.max(np.abs(ext.samples)))
    err = float(np.max(np.abs(recon - ext.samples[probe_idx])))
    rel = err / scale if scale > 0 else err
    logger.debug("DFT of %d samples, reconstruction error %.3e", n, rel)
    return FourierCoefficients(c=ext.c, n=n, coeffs=coeffs, recon_error=rel)


def hard_limiter_coefficients(n: int = DEFAULT_N, c: float = 1.0) -> FourierCoefficients:
    """Exact coefficients of the ideal limiter sgn(x): -2j/(lambda*pi), odd lambda.

    Raises:
        DomainError: even n.
    """
    if n % 2 == 0:
        raise DomainError(f"length must be odd, got {n}")
    half = (n - 1) // 2
    lam = np.arange(-half, half + 1)
    coeffs = np.zeros(n, dtype=np.complex128)
    odd = lam % 2 != 0
    coeffs[odd] = -2j / (lam[odd] * np.pi)
    return FourierCoefficients(c=c, n=n, coeffs=coeffs, recon_error=None)


def reconstruct(
    coeffs: FourierCoefficients, x: float | np.ndarray
) -> complex | np.ndarray:
    """Evaluate the truncated series sum_lambda F_lambda e^{j lambda pi x / c}.

    Diagnostic use: plotting the fitted device, convergence inspection.

    Raises:
        DomainError: any |x| > c; periodic wrap is never silent.
    """
    scalar = np.isscalar(x)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(np.abs(xs) > coeffs.c):
        raise DomainError(
            f"reconstruction point outside +/-{coeffs.c} V; "
            "evaluate within one period"
        )
    lam = coeffs.lambdas()
    out = np.empty(xs.shape, dtype=np.complex128)
    block = max(1, 2**22 // coeffs.n)
    for lo in range(0, xs.size, block):
        chunk = xs[lo : lo + block]
        phases = np.exp(1j * np.pi / coeffs.c * np.outer(chunk, lam))
        out[lo : lo + chunk.size] = phases @ coeffs.coeffs
    return complex(out[0]) if scalar else out


def save_coefficients(
    path: str | Path,
    coeffs: FourierCoefficients,
    extension_meta: dict | None = None,
    source_label: str = "",
) -> None:
    """Write a coefficient set as JSON with bit-exact float round-trip."""
    payload = {
        "c": coeffs.c,
        "n": coeffs.n,
        "coeffs": [[z.real, z.imag] for z in coeffs.coeffs],
        "extension_meta": extension_meta or {},
        "source_label": source_label,
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_coefficients(path: str | Path) -> tuple[FourierCoefficients, dict, str]:
    """Read a coefficient set written by save_coefficients.

    Returns:
        (coefficients, extension_meta, source_label).

    Raises:
        ParseError: missing keys or malformed structure.
    """
    try:
        payload = json.loads(Path(path).read_text())
        pairs = payload["coeffs"]
        coeffs = np.array([complex(re, im) for re, im in pairs])
        result = FourierCoefficients(
            c=float(payload["c"]), n=int(payload["n"]), coeffs=coeffs
        )
        return result, dict(payload.get("extension_meta", {})), str(
            payload.get("source_label", "")
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad coefficient file {path}: {exc}") from exc
