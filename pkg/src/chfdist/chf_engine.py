"""Weight series h_k, per-order term powers, and SDR of a Gaussian drive.

Given the Fourier coefficients of a device's periodic extension and an RMS
drive level sigma, each order k carries the weight

    h_k = j^k * sum_lambda F_lambda * e^{j lambda pi beta / c}
                * e^{-pi^2 sigma^2 lambda^2 / (2 c^2)} * (lambda pi / c)^k

and the term power t_k = |h_k|^2 sigma^{2k} / k!. t_1 is the correlated
(signal) output power; t_k for k >= 2 are distortion orders; t_0 is DC.
The hard limiter reproduces the arcsine series of Price's theorem, which
doubles as the built-in validation target.

Key functionality:
    - compute_weights: the weight series with convergence diagnostics
    - compute_sdr: 10 log10(t_1 / sum of distortion orders)
    - price_series_coefficients / validate_price: limiter cross-check
    - sdr_sweep: SDR vs drive level table
    - save_weights: JSON persistence

Numerics: (lambda pi / c)^k overflows long before the Gaussian factor damps
it, so per-lambda magnitudes are built in log space and each order is summed
at a common scale factor exp(max log). Terms are accumulated in descending
magnitude order with compensated summation; for odd devices the +/-lambda
pairs of even orders then cancel exactly, giving hard zeros for the even
term powers.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chfdist._backend import compensated_complex_sum
from chfdist.errors import ConvergenceError, DomainError
from chfdist.ingest import dbm_to_rms_volts
from chfdist.nonlinearity import FourierCoefficients, hard_limiter_coefficients

logger = logging.getLogger(__name__)

# Smallest odd K with t_K / sum(t) below this ends automatic order selection.
TAIL_TOLERANCE = 1e-10
K_CAP = 99

# Outermost-ring contribution above this fraction of h_k draws a warning
# (about -100 dB, the point where the harmonic budget is clearly too short).
RING_TOLERANCE = 1e-5

J_POWERS = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


@dataclass(frozen=True, slots=True)
class ConvergenceDiagnostics:
    """Per-order convergence evidence for a weight series.

    Attributes:
        n_tail_ratio: Net contribution of the outermost populated harmonic
            ring relative to |h_k|, per order k.
        k_tail_ratio: t_K relative to the cumulative term power.
        warnings: Human-readable convergence warnings.
    """

    n_tail_ratio: np.ndarray
    k_tail_ratio: float
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ratios = np.asarray(self.n_tail_ratio, dtype=np.float64).copy()
        ratios.setflags(write=False)
        object.__setattr__(self, "n_tail_ratio", ratios)
        object.__setattr__(self, "warnings", tuple(self.warnings))


@dataclass(frozen=True, slots=True)
class WeightSeries:
    """Weights h_k and term powers t_k for one device at one drive level.

    Attributes:
        sigma: RMS drive in volts.
        beta: DC bias in volts.
        c: Half-period of the extension in volts.
        k_max: Truncation order K (series runs k = 0..K).
        h: Complex h_k.
        term_powers: t_k = |h_k|^2 sigma^(2k) / k!, computed in log space.
        n_used: Fourier length N behind the weights.
        diagnostics: Convergence evidence and warnings.
    """

    sigma: float
    beta: float
    c: float
    k_max: int
    h: np.ndarray
    term_powers: np.ndarray
    n_used: int
    diagnostics: ConvergenceDiagnostics

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.complex128).copy()
        t = np.asarray(self.term_powers, dtype=np.float64).copy()
        h.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "term_powers", t)
        if h.size != self.k_max + 1 or t.size != self.k_max + 1:
            raise DomainError("weight arrays must cover k = 0..k_max")
        if np.any(t < 0):
            raise DomainError("term powers must be nonnegative")

    @property
    def signal_power(self) -> float:
        """Correlated output power t_1."""
        return float(self.term_powers[1]) if self.k_max >= 1 else 0.0

    def distortion_power(self, include_dc: bool = False) -> float:
        """Sum of t_k for k >= 2, optionally adding the DC term t_0."""
        total = float(self.term_powers[2:].sum())
        if include_dc:
            total += float(self.term_powers[0])
        return total

    @property
    def total_power(self) -> float:
        """Sum of all term powers; equals the device output power E[y^2]."""
        return float(self.term_powers.sum())


def compute_weights(
    coeffs: FourierCoefficients,
    sigma: float,
    beta: float = 0.0,
    k_max: int | None = None,
    strict: bool = False,
) -> WeightSeries:
    """Compute the weight series for one drive level.

    Args:
        coeffs: Fourier coefficients of the periodic extension.
        sigma: RMS drive in volts, > 0.
        beta: DC bias in volts.
        k_max: Truncation order; None selects the smallest odd K whose
            tail ratio t_K / sum(t) drops below 1e-10, capped at 99.
        strict: Raise instead of warn when the tail criterion is violated.

    Raises:
        DomainError: sigma <= 0 or k_max < 1.
        ConvergenceError: strict mode and the truncated series still holds
            more than the tail tolerance in its last order.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0 volts RMS, got {sigma}")
    if k_max is not None and k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    c = coeffs.c
    lam = coeffs.lambdas()
    lam_f = lam.astype(np.float64)
    base = coeffs.coeffs * np.exp(1j * np.pi * beta / c * lam_f)
    gauss_log = -(np.pi**2 * sigma**2 / (2.0 * c**2)) * lam_f**2
    with np.errstate(divide="ignore"):
        loglam = np.log(np.abs(lam_f) * np.pi / c)  # -inf at lambda = 0
    odd_sign = np.where(lam < 0, -1.0, 1.0)
    edge = int(np.max(np.abs(lam)))
    edge_rings = (np.abs(lam) == edge, np.abs(lam) == edge - 1)
    log_sigma = math.log(sigma)

    h_vals: list[complex] = []
    t_vals: list[float] = []
    ring_ratios: list[float] = []

    def eval_order(k: int) -> None:
        if k == 0:
            scale = 0.0
            terms = base * np.exp(gauss_log)
        else:
            scale_log = gauss_log + k * loglam
            scale = float(np.max(scale_log))
            terms = base * np.exp(scale_log - scale)
            if k % 2 == 1:
                terms = terms * odd_sign
        order = np.argsort(-np.abs(terms), kind="stable")
        total = compensated_complex_sum(np.ascontiguousarray(terms[order]))
        ring = max(abs(complex(terms[sel].sum())) for sel in edge_rings)
        mag = abs(total)
        if mag == 0.0:
            ring_ratios.append(0.0 if ring == 0.0 else math.inf)
            h_vals.append(0.0j)
            t_vals.append(0.0)
            return
        ring_ratios.append(ring / mag)
        with np.errstate(over="ignore"):
            h_vals.append(complex(J_POWERS[k % 4] * total * np.exp(scale)))
        log_t = 2.0 * (scale + math.log(mag)) + 2.0 * k * log_sigma - math.lgamma(k + 1)
        t_vals.append(math.exp(log_t) if log_t < 700.0 else math.inf)

    k = 0
    while True:
        eval_order(k)
        if k_max is not None:
            if k >= k_max:
                break
        elif k >= 3 and k % 2 == 1 and sum(t_vals) > 0:
            if t_vals[-1] / sum(t_vals) < TAIL_TOLERANCE:
                break
        if k_max is None and k >= K_CAP:
            break
        k += 1

    t = np.array(t_vals)
    cumulative = float(t.sum())
    k_tail = float(t[-1] / cumulative) if cumulative > 0 else 0.0
    warnings: list[str] = []
    if k_tail >= TAIL_TOLERANCE:
        msg = (
            f"term-power series not converged at K={k}: tail ratio "
            f"{k_tail:.3e} exceeds {TAIL_TOLERANCE:.0e}; slowly converging "
            "device or k_max too small"
        )
        if strict:
            raise ConvergenceError(msg)
        warnings.append(msg)
        logger.warning(msg)
    worst_ring = max(ring_ratios)
    if worst_ring > RING_TOLERANCE:
        msg = (
            f"outermost harmonic ring contributes {worst_ring:.3e} of h_k "
            f"at k={int(np.argmax(ring_ratios))}; increase the Fourier length"
        )
        warnings.append(msg)
        logger.warning(msg)

    diagnostics = ConvergenceDiagnostics(
        n_tail_ratio=np.array(ring_ratios),
        k_tail_ratio=k_tail,
        warnings=tuple(warnings),
    )
    return WeightSeries(
        sigma=sigma,
        beta=beta,
        c=c,
        k_max=k,
        h=np.array(h_vals),
        term_powers=t,
        n_used=coeffs.n,
        diagnostics=diagnostics,
    )


def compute_sdr(weights: WeightSeries, include_dc: bool = False) -> float:
    """Signal-to-distortion ratio 10 log10(t_1) - 10 log10(sum_{k>=2} t_k).

    DC (t_0) stays out of the distortion sum unless include_dc is set; it
    lands at f = 0, outside any bandpass analysis window.

    Returns:
        SDR in dB; +inf for a distortion-free (linear) device, -inf when
        the device has no correlated output at all. Both log a warning.
    """
    signal = weights.signal_power
    distortion = weights.distortion_power(include_dc)
    if signal <= 0.0:
        logger.warning("no correlated output power (t_1 = 0); SDR is -inf")
        return -math.inf
    if distortion <= 0.0:
        logger.warning("zero distortion power; SDR is +inf (linear device)")
        return math.inf
    return 10.0 * math.log10(signal) - 10.0 * math.log10(distortion)


def price_series_coefficients(k_max: int) -> np.ndarray:
    """Arcsine-series coefficients of the hard limiter, index k = 0..k_max.

    The coefficient of rho^(2m+1) in (2/pi) arcsin(rho) is
    (2/pi) (2m)! / (4^m (m!)^2 (2m+1)); even orders are zero.
    """
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    out = np.zeros(k_max + 1)
    for m in range((k_max + 1) // 2):
        k = 2 * m + 1
        if k > k_max:
            break
        out[k] = 2.0 * math.comb(2 * m, m) / (4**m * (2 * m + 1)) / math.pi
    return out


@dataclass(frozen=True, slots=True)
class PriceComparison:
    """Per-order comparison of limiter term powers with the arcsine series.

    rows hold (k, t_k, arcsine coefficient, error); the error column is
    relative for odd k and the absolute residual for even k (reference 0).
    """

    rows: tuple[tuple[int, float, float, float], ...]
    max_odd_rel_error: float
    max_even_residual: float


def validate_price(n: int = 8001, k_max: int = 9) -> PriceComparison:
    """Check the limiter weight series against Price's theorem.

    Runs hard_limiter_coefficients(n) -> compute_weights(sigma=0.1, beta=0,
    c=1) and compares term powers with the arcsine series. Reports, never
    raises: under-resolved configurations simply show large errors.
    """
    coeffs = hard_limiter_coefficients(n=n, c=1.0)
    ws = compute_weights(coeffs, sigma=0.1, beta=0.0, k_max=k_max, strict=False)
    reference = price_series_coefficients(k_max)
    rows = []
    max_odd = 0.0
    max_even = 0.0
    for k in range(k_max + 1):
        t_k = float(ws.term_powers[k])
        ref = float(reference[k])
        if k % 2 == 1:
            err = abs(t_k - ref) / ref
            max_odd = max(max_odd, err)
        else:
            err = abs(t_k)
            max_even = max(max_even, err)
        rows.append((k, t_k, ref, err))
    return PriceComparison(
        rows=tuple(rows), max_odd_rel_error=max_odd, max_even_residual=max_even
    )


@dataclass(frozen=True, slots=True)
class SweepRow:
    """One drive level of an SDR sweep."""

    p_in_dbm: float
    sigma_v: float
    sdr_db: float
    p_signal: float
    p_distortion: float
    error: str | None = None


def sdr_sweep(
    coeffs: FourierCoefficients,
    p_start_dbm: float,
    p_stop_dbm: float,
    p_step_db: float,
    beta: float = 0.0,
    r_ohm: float = 50.0,
    k_max: int | None = None,
    include_dc: bool = False,
    strict: bool = False,
) -> list[SweepRow]:
    """SDR versus drive level, one row per power step.

    Rows where the weight computation fails in strict mode carry the error
    message instead of aborting the sweep.

    Raises:
        DomainError: empty range or nonpositive step.
    """
    if p_step_db <= 0:
        raise DomainError(f"sweep step must be > 0 dB, got {p_step_db}")
    if p_stop_dbm < p_start_dbm:
        raise DomainError("sweep range is empty (stop below start)")
    levels = np.arange(p_start_dbm, p_stop_dbm + p_step_db / 2.0, p_step_db)
    rows: list[SweepRow] = []
    for p_dbm in levels:
        sigma = dbm_to_rms_volts(float(p_dbm), r_ohm)
        try:
            ws = compute_weights(
                coeffs, sigma=sigma, beta=beta, k_max=k_max, strict=strict
            )
        except ConvergenceError as exc:
            rows.append(
                SweepRow(float(p_dbm), sigma, math.nan, math.nan, math.nan, str(exc))
            )
            continue
        rows.append(
            SweepRow(
                p_in_dbm=float(p_dbm),
                sigma_v=sigma,
                sdr_db=compute_sdr(ws, include_dc),
                p_signal=ws.signal_power,
                p_distortion=ws.distortion_power(include_dc),
            )
        )
    return rows


def save_weights(path: str | Path, weights: WeightSeries) -> None:
    """Write a weight series as JSON (floats round-trip bit-exactly)."""
    payload = {
        "sigma": weights.sigma,
        "beta": weights.beta,
        "c": weights.c,
        "k_max": weights.k_max,
        "h": [[z.real, z.imag] for z in weights.h],
        "term_powers": [float(t) for t in weights.term_powers],
        "diagnostics": {
            "n_used": weights.n_used,
            "n_tail_ratio": [float(r) for r in weights.diagnostics.n_tail_ratio],
            "k_tail_ratio": weights.diagnostics.k_tail_ratio,
            "warnings": list(weights.diagnostics.warnings),
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1) + "\n")
