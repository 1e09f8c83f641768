"""Autoconvolutions of the input spectrum and the predicted output spectrum.

The output spectrum of a Gaussian drive through a memoryless device is the
weighted sum over orders k of the k-fold autoconvolution of the clean input
spectrum, each normalized to unit area and weighted by the term power t_k.
The k=1 term is the correlated signal; k >= 2 terms are distortion; the DC
term t_0 stays a scalar and is never painted onto the frequency grid.

Key functionality:
    - to_linear / normalize_to_unit_area / subtract_noise_floor
    - autoconvolve: k-fold autoconvolution, `same` (centered truncation,
      loss tracked) or `full` (grid grows, exact power accounting)
    - predict_output_spectrum: weighted synthesis into ComponentSpectra
    - integrate_power / sdr_from_spectra / build_report
    - write_spectrum_csv: plot-ready per-bin dBm columns
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from chfdist._backend import convolve_full
from chfdist._util import atomic_write_text
from chfdist.chf_engine import WeightSeries
from chfdist.errors import DomainError, GridError
from chfdist.ingest import SpectrumTrace

logger = logging.getLogger(__name__)

LINEAR_UNITS = ("linear_power", "unit_area_density", "mv_squared")

# Orders whose term power falls below this share of the total are dropped.
INCLUSION_TOLERANCE = 1e-12

# Same-mode truncation loss above this fraction draws a warning.
LOSS_WARNING_FRACTION = 0.05


@dataclass(frozen=True, slots=True)
class Spectrum:
    """Uniformly gridded nonnegative spectrum in linear units.

    Attributes:
        f_start_hz: Frequency of the first bin.
        f_step_hz: Bin spacing, > 0.
        values: Per-bin linear power or density, >= 0.
        unit: "linear_power", "unit_area_density", or "mv_squared".
    """

    f_start_hz: float
    f_step_hz: float
    values: np.ndarray
    unit: str

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.unit not in LINEAR_UNITS:
            raise DomainError(f"unknown spectrum unit {self.unit!r}")
        if self.f_step_hz <= 0:
            raise GridError(f"f_step_hz must be > 0, got {self.f_step_hz}")
        if values.size < 1:
            raise DomainError("spectrum needs at least one bin")
        if not np.all(np.isfinite(values)):
            raise DomainError("spectrum values must be finite")
        if np.any(values < 0):
            raise DomainError("linear spectrum values must be >= 0")

    def frequencies(self) -> np.ndarray:
        """Bin-center frequency axis."""
        return self.f_start_hz + self.f_step_hz * np.arange(self.values.size)


class AutoconvResult(NamedTuple):
    """k-fold autoconvolution plus the area lost to same-mode truncation."""

    spectrum: Spectrum
    lost_area: float


@dataclass(frozen=True, slots=True)
class ComponentSpectra:
    """Predicted output spectrum, separated into signal and distortion.

    Attributes:
        per_k: Unit-area k-fold autoconvolutions on their native grids.
        contributions: t_k-weighted per-order spectra on the common grid.
        weighted_total: signal + distortion, bin-wise.
        signal: k=1 contribution.
        distortion: Sum of k >= 2 contributions (DC excluded; see dc_power).
        lost_area: Per-order truncation loss fraction (0 in full mode).
        dc_power: Term power t_0, kept as a scalar impulse at f = 0.
        warnings: Truncation-loss warnings from the synthesis.
    """

    per_k: dict[int, Spectrum]
    contributions: dict[int, Spectrum]
    weighted_total: Spectrum
    signal: Spectrum
    distortion: Spectrum
    lost_area: dict[int, float]
    dc_power: float
    warnings: tuple[str, ...] = ()


def to_linear(
    trace: SpectrumTrace,
    mv_squared: bool = False,
    r_ohm: float = 50.0,
    rbw_correction: bool = False,
) -> Spectrum:
    """Convert a dBm-per-bin trace to linear per-bin power.

    Args:
        trace: Instrument trace with unit "dBm_per_bin".
        mv_squared: Emit mV^2 per bin (v^2 = R * P * 1e6) instead of watts.
        r_ohm: Load resistance for the mV^2 conversion.
        rbw_correction: Multiply per-bin power by f_step/rbw to undo an
            analyzer resolution bandwidth wider than the bin spacing
            (requires rbw metadata on the trace).

    Raises:
        DomainError: Wrong input unit, or rbw correction without metadata.
    """
    if trace.unit != "dBm_per_bin":
        raise DomainError(f"expected a dBm_per_bin trace, got {trace.unit!r}")
    watts = 10.0 ** ((trace.values - 30.0) / 10.0)
    if rbw_correction:
        if trace.rbw_hz is None or trace.rbw_hz <= 0:
            raise DomainError("rbw correction requested but the trace has no rbw_hz")
        watts = watts * (trace.f_step_hz / trace.rbw_hz)
    if mv_squared:
        return Spectrum(
            trace.f_start_hz, trace.f_step_hz, watts * r_ohm * 1e6, "mv_squared"
        )
    return Spectrum(trace.f_start_hz, trace.f_step_hz, watts, "linear_power")


def subtract_noise_floor(s: Spectrum) -> Spectrum:
    """Clip off the analyzer noise floor before normalization.

    Subtracts the median of the lowest decile of bins and clamps at zero;
    measured traces carry a floor that otherwise inflates high-k skirts.
    """
    n_floor = max(1, s.values.size // 10)
    floor = float(np.median(np.sort(s.values)[:n_floor]))
    return Spectrum(
        s.f_start_hz, s.f_step_hz, np.maximum(s.values - floor, 0.0), s.unit
    )


def normalize_to_unit_area(s: Spectrum) -> Spectrum:
    """Scale to unit integral: values / (sum * f_step).

    Raises:
        DomainError: all-zero spectrum (degenerate input).
    """
    total = float(s.values.sum())
    if total <= 0.0:
        raise DomainError("cannot normalize an all-zero spectrum")
    return Spectrum(
        s.f_start_hz,
        s.f_step_hz,
        s.values / (total * s.f_step_hz),
        "unit_area_density",
    )


def autoconvolve(s: Spectrum, k: int, mode: str = "same") -> AutoconvResult:
    """k-fold autoconvolution of a unit-area density.

    Iterated pairwise discrete convolution, each stage multiplied by the
    bin width to preserve unit area. Mode `same` truncates every stage back
    to the input grid (centered), recording the lost area; mode `full`
    grows the grid to k*(L-1)+1 bins starting at k*f_start and keeps the
    area exactly.

    Raises:
        DomainError: k < 1, unknown mode, or input not unit-area.
    """
    if k < 1:
        raise DomainError(f"autoconvolution order must be >= 1, got {k}")
    if mode not in ("same", "full"):
        raise DomainError(f"mode must be 'same' or 'full', got {mode!r}")
    if s.unit != "unit_area_density":
        raise DomainError("autoconvolution expects a unit-area density")
    if k == 1:
        return AutoconvResult(s, 0.0)
    # The kernel wants writable contiguous buffers; stored values are frozen.
    base = np.array(s.values, dtype=np.float64)
    length = base.size
    acc = base
    for _ in range(k - 1):
        acc = convolve_full(acc, base) * s.f_step_hz
        if mode == "same":
            lo = (acc.size - length) // 2
            acc = np.ascontiguousarray(acc[lo : lo + length])
    if mode == "same":
        out = Spectrum(s.f_start_hz, s.f_step_hz, acc, "unit_area_density")
        return AutoconvResult(out, 1.0 - float(acc.sum()) * s.f_step_hz)
    out = Spectrum(k * s.f_start_hz, s.f_step_hz, acc, "unit_area_density")
    return AutoconvResult(out, 0.0)


def _hull_grid(spectra: list[Spectrum]) -> tuple[float, int]:
    """Start frequency and length of the union grid of aligned spectra.

    Raises:
        GridError: per-order grids whose offsets are not whole bins.
    """
    df = spectra[0].f_step_hz
    start = min(sp.f_start_hz for sp in spectra)
    end = max(sp.f_start_hz + (sp.values.size - 1) * df for sp in spectra)
    for sp in spectra:
        offset = (sp.f_start_hz - start) / df
        if abs(offset - round(offset)) > 1e-6:
            raise GridError(
                "full-mode per-order grids are offset by a fraction of a bin "
                f"({offset:.6f}); use mode 'same' or a grid whose start is a "
                "multiple of the bin spacing"
            )
    return start, int(round((end - start) / df)) + 1


def predict_output_spectrum(
    weights: WeightSeries, s_in: Spectrum, mode: str = "same"
) -> ComponentSpectra:
    """Synthesize the predicted output spectrum from a weight series.

    Normalizes the input, autoconvolves it per included order (those with
    t_k above 1e-12 of the total power), weights by t_k, and sums. The
    signal/distortion split is exact by construction: weighted_total is
    computed as the literal bin-wise sum of the two parts.

    Raises:
        DomainError: degenerate input spectrum or no output power.
        GridError: full-mode grids that cannot be aligned bin-exactly.
    """
    density = normalize_to_unit_area(s_in)
    total = weights.total_power
    if total <= 0.0:
        raise DomainError("device has no output power; nothing to predict")
    t = weights.term_powers
    included = [
        k for k in range(1, weights.k_max + 1) if t[k] / total > INCLUSION_TOLERANCE
    ]
    per_k: dict[int, Spectrum] = {}
    lost: dict[int, float] = {}
    warnings: list[str] = []
    for k in included:
        result = autoconvolve(density, k, mode)
        per_k[k] = result.spectrum
        lost[k] = result.lost_area
        if mode == "same" and result.lost_area > LOSS_WARNING_FRACTION:
            msg = (
                f"order {k} loses {result.lost_area:.1%} of its area to "
                "same-mode truncation; use full mode for exact power accounting"
            )
            warnings.append(msg)
            logger.warning(msg)

    if included:
        start, n_hull = _hull_grid(list(per_k.values()))
    else:
        start, n_hull = density.f_start_hz, density.values.size
    df = density.f_step_hz

    contributions: dict[int, Spectrum] = {}
    signal_vals = np.zeros(n_hull)
    distortion_vals = np.zeros(n_hull)
    for k in included:
        sp = per_k[k]
        offset = int(round((sp.f_start_hz - start) / df))
        embedded = np.zeros(n_hull)
        embedded[offset : offset + sp.values.size] = float(t[k]) * sp.values
        contributions[k] = Spectrum(start, df, embedded, "linear_power")
        if k == 1:
            signal_vals += embedded
        else:
            distortion_vals += embedded

    signal = Spectrum(start, df, signal_vals, "linear_power")
    distortion = Spectrum(start, df, distortion_vals, "linear_power")
    weighted_total = Spectrum(
        start, df, signal.values + distortion.values, "linear_power"
    )
    return ComponentSpectra(
        per_k=per_k,
        contributions=contributions,
        weighted_total=weighted_total,
        signal=signal,
        distortion=distortion,
        lost_area=lost,
        dc_power=float(t[0]),
        warnings=tuple(warnings),
    )


def integrate_power(s: Spectrum) -> float:
    """Total power: sum of values times the bin width."""
    return float(s.values.sum()) * s.f_step_hz


def _band_power(s: Spectrum, band: tuple[float, float] | None) -> float:
    if band is None:
        return integrate_power(s)
    lo, hi = band
    if hi < lo:
        raise DomainError(f"band limits are reversed: {band}")
    f = s.frequencies()
    slack = 1e-9 * s.f_step_hz
    mask = (f >= lo - slack) & (f <= hi + slack)
    if not np.any(mask):
        raise DomainError(
            f"band [{lo}, {hi}] Hz contains no bins of the spectrum grid"
        )
    return float(s.values[mask].sum()) * s.f_step_hz


def sdr_from_spectra(
    cs: ComponentSpectra,
    band: tuple[float, float] | None = None,
    include_dc: bool = False,
) -> float:
    """Band-limited SDR from separated spectra.

    With no band, integrates the whole grid; in full mode that reproduces
    the term-power SDR since every per-order spectrum has unit area. The
    scalar DC power joins the distortion only when include_dc is set and
    the band (if any) covers f = 0.

    Returns:
        SDR in dB; +inf when the band holds no distortion, -inf when it
        holds no signal.

    Raises:
        DomainError: band outside the spectrum grid.
    """
    signal = _band_power(cs.signal, band)
    distortion = _band_power(cs.distortion, band)
    if include_dc and (band is None or band[0] <= 0.0 <= band[1]):
        distortion += cs.dc_power
    if signal <= 0.0:
        logger.warning("band holds no signal power; SDR is -inf")
        return -math.inf
    if distortion <= 0.0:
        logger.warning("band holds no distortion power; SDR is +inf")
        return math.inf
    return 10.0 * math.log10(signal / distortion)


def build_report(
    cs: ComponentSpectra, weights: WeightSeries, include_dc: bool = False
) -> dict:
    """Prediction summary: SDR, powers, per-order losses, warnings."""
    total = integrate_power(cs.weighted_total)
    if include_dc:
        total += cs.dc_power
    return {
        "sdr_db": sdr_from_spectra(cs, include_dc=include_dc),
        "total_power": total,
        "term_powers": [float(t) for t in weights.term_powers],
        "lost_area": {str(k): float(v) for k, v in sorted(cs.lost_area.items())},
        "warnings": list(weights.diagnostics.warnings) + list(cs.warnings),
    }


def _dbm_column(values: np.ndarray, df: float, r_ohm: float) -> list[str]:
    """Per-bin dBm strings; empty field where the bin is exactly zero."""
    out = []
    for v in values:
        if v <= 0.0:
            out.append("")
        else:
            watts = v * df / r_ohm
            out.append(f"{10.0 * math.log10(watts) + 30.0:.6f}")
    return out


def write_spectrum_csv(
    path: str | Path, cs: ComponentSpectra, r_ohm: float = 50.0
) -> None:
    """Write `freq_hz,total_dbm,signal_dbm,distortion_dbm[,k3_dbm,...]`.

    Values are V^2/Hz densities; each bin converts via P = density * df / R
    to watts and then to dBm. Zero bins render as empty fields.
    """
    df = cs.weighted_total.f_step_hz
    extra = sorted(k for k in cs.contributions if k >= 2)
    header = ["freq_hz", "total_dbm", "signal_dbm", "distortion_dbm"]
    header += [f"k{k}_dbm" for k in extra]
    columns = [
        _dbm_column(cs.weighted_total.values, df, r_ohm),
        _dbm_column(cs.signal.values, df, r_ohm),
        _dbm_column(cs.distortion.values, df, r_ohm),
    ]
    columns += [_dbm_column(cs.contributions[k].values, df, r_ohm) for k in extra]
    lines = [",".join(header)]
    for i, f in enumerate(cs.weighted_total.frequencies()):
        lines.append(",".join([repr(float(f))] + [col[i] for col in columns]))
    atomic_write_text(path, "\n".join(lines) + "\n")
