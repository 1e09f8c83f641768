"""Output-spectrum, distortion, and SDR prediction for Gaussian signals
driven through memoryless nonlinearities, by the series characteristic-
function method: a Fourier-series model of the device, a weight series per
drive level, and weighted autoconvolutions of the input spectrum."""

from chfdist._backend import BACKEND
from chfdist.chf_engine import (
    ConvergenceDiagnostics,
    PriceComparison,
    SweepRow,
    WeightSeries,
    compute_sdr,
    compute_weights,
    price_series_coefficients,
    save_weights,
    sdr_sweep,
    validate_price,
)
from chfdist.errors import (
    ChfdistError,
    ConvergenceError,
    DomainError,
    GridError,
    InsufficientDataError,
    OrderingError,
    ParseError,
    SaturationError,
)
from chfdist.ingest import (
    SpectrumTrace,
    TransferCurve,
    VnaSweepRecord,
    dbm_to_peak_volts,
    dbm_to_rms_volts,
    parse_spectrum_csv,
    parse_vna_csv,
    rms_volts_to_dbm,
    s21_to_transfer_curve,
)
from chfdist.mc_oracle import (
    OracleConfig,
    PsdEstimate,
    SpectraComparison,
    apply_memoryless_nonlinearity,
    compare_spectra,
    estimate_psd,
    oracle_sdr,
    run_oracle,
    synthesize_gaussian_signal,
)
from chfdist.nonlinearity import (
    FourierCoefficients,
    PeriodicExtension,
    analytic_model_samples,
    build_periodic_extension,
    default_half_period,
    fourier_coefficients_from_samples,
    hard_limiter_coefficients,
    load_coefficients,
    reconstruct,
    save_coefficients,
)
from chfdist.spectrum_engine import (
    AutoconvResult,
    ComponentSpectra,
    Spectrum,
    autoconvolve,
    build_report,
    integrate_power,
    normalize_to_unit_area,
    predict_output_spectrum,
    sdr_from_spectra,
    subtract_noise_floor,
    to_linear,
    write_spectrum_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # errors
    "ChfdistError",
    "ConvergenceError",
    "DomainError",
    "GridError",
    "InsufficientDataError",
    "OrderingError",
    "ParseError",
    "SaturationError",
    # ingest
    "SpectrumTrace",
    "TransferCurve",
    "VnaSweepRecord",
    "dbm_to_peak_volts",
    "dbm_to_rms_volts",
    "parse_spectrum_csv",
    "parse_vna_csv",
    "rms_volts_to_dbm",
    "s21_to_transfer_curve",
    # nonlinearity
    "FourierCoefficients",
    "PeriodicExtension",
    "analytic_model_samples",
    "build_periodic_extension",
    "default_half_period",
    "fourier_coefficients_from_samples",
    "hard_limiter_coefficients",
    "load_coefficients",
    "reconstruct",
    "save_coefficients",
    # weight series
    "ConvergenceDiagnostics",
    "PriceComparison",
    "SweepRow",
    "WeightSeries",
    "compute_sdr",
    "compute_weights",
    "price_series_coefficients",
    "save_weights",
    "sdr_sweep",
    "validate_price",
    # spectra
    "AutoconvResult",
    "ComponentSpectra",
    "Spectrum",
    "autoconvolve",
    "build_report",
    "integrate_power",
    "normalize_to_unit_area",
    "predict_output_spectrum",
    "sdr_from_spectra",
    "subtract_noise_floor",
    "to_linear",
    "write_spectrum_csv",
    # simulation oracle
    "OracleConfig",
    "PsdEstimate",
    "SpectraComparison",
    "apply_memoryless_nonlinearity",
    "compare_spectra",
    "estimate_psd",
    "oracle_sdr",
    "run_oracle",
    "synthesize_gaussian_signal",
]
