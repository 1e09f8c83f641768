"""Instrument-style CSV parsing and power/voltage unit conversions.

Reads VNA S21 power sweeps and spectrum-analyzer traces from comma-delimited
text (explicit column-name headers required; instrument exports vary and
positional guessing fails silently) and converts between dBm and volt
conventions for a given load resistance.

Key functionality:
    - parse_vna_csv / parse_spectrum_csv: text -> validated records
    - dbm_to_rms_volts / dbm_to_peak_volts / rms_volts_to_dbm: conversions
    - s21_to_transfer_curve: S21 sweep -> complex voltage transfer curve
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from chfdist.errors import (
    DomainError,
    GridError,
    InsufficientDataError,
    OrderingError,
    ParseError,
)

logger = logging.getLogger(__name__)

DEFAULT_RESISTANCE_OHM = 50.0

VNA_COLUMNS = ("p_in_dbm", "s21_mag_db", "s21_phase_deg")
SPECTRUM_COLUMNS = ("freq_hz", "power_dbm")

SPECTRUM_UNITS = ("dBm_per_bin", "linear_power", "unit_area_density")

# Relative spacing deviation above which a grid is rejected as non-uniform.
GRID_TOLERANCE = 0.01


@dataclass(frozen=True, slots=True)
class VnaSweepRecord:
    """One point of an S21 power sweep: drive power and complex gain in dB/deg."""

    p_in_dbm: float
    s21_mag_db: float
    s21_phase_deg: float


@dataclass(frozen=True, slots=True)
class SpectrumTrace:
    """Uniformly gridded per-bin spectrum in a declared unit.

    Attributes:
        f_start_hz: Frequency of the first bin.
        f_step_hz: Bin spacing, > 0, uniform.
        values: Per-bin power in the declared unit.
        unit: One of "dBm_per_bin", "linear_power", "unit_area_density".
        rbw_hz: Optional resolution-bandwidth metadata from the instrument.
    """

    f_start_hz: float
    f_step_hz: float
    values: np.ndarray
    unit: str
    rbw_hz: float | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.unit not in SPECTRUM_UNITS:
            raise DomainError(f"unknown spectrum unit {self.unit!r}")
        if self.f_step_hz <= 0:
            raise GridError(f"f_step_hz must be > 0, got {self.f_step_hz}")
        if values.size < 3:
            raise InsufficientDataError(
                f"spectrum needs at least 3 bins, got {values.size}"
            )
        if self.unit == "unit_area_density":
            area = float(values.sum()) * self.f_step_hz
            if not math.isclose(area, 1.0, rel_tol=1e-9):
                raise DomainError(
                    f"unit_area_density trace integrates to {area!r}, not 1"
                )

    def frequencies(self) -> np.ndarray:
        """Bin-center frequency axis."""
        return self.f_start_hz + self.f_step_hz * np.arange(self.values.size)


@dataclass(frozen=True, slots=True)
class TransferCurve:
    """Sampled complex voltage transfer function of a device.

    Attributes:
        v_in: Input peak volts, >= 0, strictly ascending, v_in[0] == 0.
        v_out: Complex output volts at each v_in; v_out[0] == 0.
        r_ohm: Reference load resistance.
        label: Free-text provenance.
    """

    v_in: np.ndarray
    v_out: np.ndarray
    r_ohm: float
    label: str

    def __post_init__(self) -> None:
        v_in = np.asarray(self.v_in, dtype=np.float64).copy()
        v_out = np.asarray(self.v_out, dtype=np.complex128).copy()
        v_in.setflags(write=False)
        v_out.setflags(write=False)
        object.__setattr__(self, "v_in", v_in)
        object.__setattr__(self, "v_out", v_out)
        if v_in.size != v_out.size or v_in.size < 2:
            raise DomainError("transfer curve needs matching v_in/v_out, >= 2 points")
        if v_in[0] != 0.0 or v_out[0] != 0.0:
            raise DomainError("transfer curve must start at the origin (0, 0)")
        if not np.all(np.diff(v_in) > 0):
            raise OrderingError("transfer curve v_in must be strictly increasing")

    @property
    def v_max(self) -> float:
        """Largest measured input voltage."""
        return float(self.v_in[-1])

    def is_real(self, tol: float = 0.0) -> bool:
        """True when the curve carries no phase (all outputs real within tol)."""
        return bool(np.all(np.abs(self.v_out.imag) <= tol))


def _lines(text: str | io.TextIOBase) -> list[str]:
    if hasattr(text, "read"):
        text = text.read()
    return str(text).splitlines()


def _header_index(line: str, expected: tuple[str, ...]) -> dict[str, int]:
    names = [t.strip().casefold() for t in line.split(",")]
    index: dict[str, int] = {}
    for col in expected:
        matches = [i for i, n in enumerate(names) if n == col.casefold()]
        if len(matches) != 1:
            raise ParseError(
                f"header must name columns {', '.join(expected)} exactly once; "
                f"got {line.strip()!r}"
            )
        index[col] = matches[0]
    if len(names) != len(expected):
        raise ParseError(
            f"header has {len(names)} columns, expected {len(expected)} "
            f"({', '.join(expected)})"
        )
    return index


def _parse_row(line: str, lineno: int, n_cols: int) -> list[float]:
    tokens = [t.strip() for t in line.split(",")]
    if len(tokens) != n_cols:
        raise ParseError(f"line {lineno}: expected {n_cols} fields, got {len(tokens)}")
    out = []
    for tok in tokens:
        try:
            out.append(float(tok))
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field {tok!r}") from None
    return out


def parse_vna_csv(text: str | io.TextIOBase) -> list[VnaSweepRecord]:
    """Parse a VNA S21 power-sweep CSV into sweep records.

    Args:
        text: CSV content (string or readable) with header
            ``p_in_dbm,s21_mag_db,s21_phase_deg`` (case-insensitive).

    Returns:
        Records in ascending p_in_dbm order, at least 4 of them.

    Raises:
        ParseError: Malformed header or non-numeric field (line-numbered).
        OrderingError: p_in_dbm not strictly increasing.
        InsufficientDataError: Fewer than 4 records (interpolation needs 4).
    """
    lines = _lines(text)
    if not lines or not lines[0].strip():
        raise ParseError("empty input, expected a header line")
    index = _header_index(lines[0], VNA_COLUMNS)

    records: list[VnaSweepRecord] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        row = _parse_row(line, lineno, len(VNA_COLUMNS))
        records.append(
            VnaSweepRecord(
                p_in_dbm=row[index["p_in_dbm"]],
                s21_mag_db=row[index["s21_mag_db"]],
                s21_phase_deg=row[index["s21_phase_deg"]],
            )
        )
        if not (
            math.isfinite(records[-1].s21_mag_db)
            and math.isfinite(records[-1].s21_phase_deg)
        ):
            raise ParseError(f"line {lineno}: non-finite S21 value")

    if len(records) < 4:
        raise InsufficientDataError(
            f"need at least 4 sweep records for interpolation, got {len(records)}"
        )
    p = [r.p_in_dbm for r in records]
    if any(b <= a for a, b in zip(p, p[1:])):
        raise OrderingError("p_in_dbm must be strictly increasing across the sweep")
    logger.debug("parsed %d VNA sweep records", len(records))
    return records


def parse_spectrum_csv(text: str | io.TextIOBase) -> SpectrumTrace:
    """Parse a spectrum-analyzer trace CSV into a SpectrumTrace.

    Leading comment lines of the form ``# key=value`` before the header are
    read as metadata (recognized: ``rbw_hz``). Columns: ``freq_hz,power_dbm``,
    frequency ascending on a uniform grid.

    Returns:
        SpectrumTrace with unit "dBm_per_bin" and f_step_hz set to the mean
        spacing.

    Raises:
        ParseError: Malformed header/row.
        OrderingError: Descending or duplicate frequencies.
        GridError: Any spacing deviating more than 1% from the mean.
        InsufficientDataError: Fewer than 3 rows.
    """
    lines = _lines(text)
    meta: dict[str, float] = {}
    start = 0
    for line in lines:
        stripped = line.strip()
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                try:
                    meta[key.strip().casefold()] = float(value)
                except ValueError:
                    logger.debug("ignoring non-numeric metadata %r", stripped)
            start += 1
        else:
            break
    if start >= len(lines) or not lines[start].strip():
        raise ParseError("missing header line")
    index = _header_index(lines[start], SPECTRUM_COLUMNS)

    freqs: list[float] = []
    powers: list[float] = []
    for lineno, line in enumerate(lines[start + 1 :], start=start + 2):
        if not line.strip():
            continue
        row = _parse_row(line, lineno, len(SPECTRUM_COLUMNS))
        freqs.append(row[index["freq_hz"]])
        powers.append(row[index["power_dbm"]])

    if len(freqs) < 3:
        raise InsufficientDataError(
            f"need at least 3 spectrum rows, got {len(freqs)}"
        )
    f = np.asarray(freqs)
    gaps = np.diff(f)
    if np.any(gaps <= 0):
        raise OrderingError("freq_hz must be strictly ascending")
    mean_gap = float(gaps.mean())
    worst = float(np.max(np.abs(gaps - mean_gap)) / mean_gap)
    if worst > GRID_TOLERANCE:
        raise GridError(
            f"non-uniform frequency grid: worst spacing deviation "
            f"{worst * 100:.1f}% of the mean ({mean_gap:g} Hz)"
        )
    return SpectrumTrace(
        f_start_hz=float(f[0]),
        f_step_hz=mean_gap,
        values=np.asarray(powers),
        unit="dBm_per_bin",
        rbw_hz=meta.get("rbw_hz"),
    )


def dbm_to_rms_volts(p_dbm: float, r_ohm: float = DEFAULT_RESISTANCE_OHM) -> float:
    """RMS volts of power p_dbm into r_ohm: sqrt(R * 10^((p-30)/10))."""
    if r_ohm <= 0:
        raise DomainError(f"load resistance must be > 0, got {r_ohm}")
    return math.sqrt(r_ohm * 10.0 ** ((p_dbm - 30.0) / 10.0))


def dbm_to_peak_volts(p_dbm: float, r_ohm: float = DEFAULT_RESISTANCE_OHM) -> float:
    """Peak volts of a single tone of power p_dbm into r_ohm (sqrt(2) x RMS)."""
    return math.sqrt(2.0) * dbm_to_rms_volts(p_dbm, r_ohm)


def rms_volts_to_dbm(v_rms: float, r_ohm: float = DEFAULT_RESISTANCE_OHM) -> float:
    """Inverse of dbm_to_rms_volts: 20*log10(v) + 10*log10(1000/R)."""
    if r_ohm <= 0:
        raise DomainError(f"load resistance must be > 0, got {r_ohm}")
    if v_rms <= 0:
        raise DomainError(f"RMS voltage must be > 0, got {v_rms}")
    return 20.0 * math.log10(v_rms) + 10.0 * math.log10(1000.0 / r_ohm)


def s21_to_transfer_curve(
    sweep: list[VnaSweepRecord],
    r_ohm: float = DEFAULT_RESISTANCE_OHM,
    label: str = "s21-sweep",
) -> TransferCurve:
    """Convert an S21 power sweep to a complex voltage transfer curve.

    Each record maps to v_in = peak volts of the swept tone and
    v_out = v_in * 10^(mag_db/20) * exp(j*phase). The origin (0, 0) is
    prepended: a memoryless device passes zero to zero, and the odd
    periodic extension needs the point.
    """
    v_in = np.array([dbm_to_peak_volts(r.p_in_dbm, r_ohm) for r in sweep])
    gain = np.array(
        [
            10.0 ** (r.s21_mag_db / 20.0)
            * np.exp(1j * math.radians(r.s21_phase_deg))
            for r in sweep
        ]
    )
    return TransferCurve(
        v_in=np.concatenate(([0.0], v_in)),
        v_out=np.concatenate(([0.0 + 0.0j], v_in * gain)),
        r_ohm=r_ohm,
        label=label,
    )
