"""Command-line front end for the distortion prediction pipeline.

Subcommands wire the library stages together: ``fit-nonlinearity`` turns a
measured sweep or a built-in model into a Fourier coefficient file,
``predict`` turns coefficients plus an input spectrum into the predicted
output decomposition, ``sdr-sweep`` tabulates SDR against drive level,
``validate-price`` checks the limiter weights against their closed form,
and ``oracle`` cross-validates a prediction with a time-domain simulation.

Every command is a pure function of its input files, flags, and seed:
rerunning with identical inputs produces byte-identical output files. All
file output lands in the directory given by ``--out`` (or the CHFDIST_OUT
environment variable, falling back to the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._util import atomic_write_text
from .chf_engine import compute_weights, sdr_sweep, validate_price
from .errors import ChfdistError, DomainError
from .ingest import (
    TransferCurve,
    dbm_to_rms_volts,
    parse_spectrum_csv,
    parse_vna_csv,
    s21_to_transfer_curve,
)
from .mc_oracle import OracleConfig, run_oracle
from .nonlinearity import (
    analytic_model_samples,
    build_periodic_extension,
    fourier_coefficients_from_samples,
    hard_limiter_coefficients,
    load_coefficients,
    reconstruct,
    save_coefficients,
)
from .spectrum_engine import (
    build_report,
    normalize_to_unit_area,
    predict_output_spectrum,
    subtract_noise_floor,
    to_linear,
    write_spectrum_csv,
)

DEFAULT_N = 8001
PRICE_TOL_ODD = 1e-9
PRICE_TOL_EVEN = 1e-12
CURVE_POINTS = 1025

COEFFS_FILE = "coefficients.json"
SPECTRUM_FILE = "predicted_spectrum.csv"
PREDICT_REPORT_FILE = "predict_report.json"
SWEEP_FILE = "sdr_sweep.csv"
ORACLE_REPORT_FILE = "oracle_report.json"


def _output_dir(args: argparse.Namespace) -> Path:
    out = args.out or os.environ.get("CHFDIST_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


MAX_STDERR_WARNINGS = 8


def _print_warnings(warnings) -> None:
    for message in warnings[:MAX_STDERR_WARNINGS]:
        print(f"warning: {message}", file=sys.stderr)
    hidden = len(warnings) - MAX_STDERR_WARNINGS
    if hidden > 0:
        print(f"warning: ({hidden} more in the report)", file=sys.stderr)


def _model_params(args: argparse.Namespace) -> dict[str, float]:
    params: dict[str, float] = {}
    for item in args.model_param or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise DomainError(f"model parameter must look like name=value, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise DomainError(f"model parameter {key.strip()!r} is not a number: {value!r}")
    return params


def _model_transfer_curve(
    model: str, params: dict[str, float], r_ohm: float
) -> TransferCurve:
    """Build the time-domain transfer curve of a named analytic model."""
    if model == "signum":
        if params:
            raise DomainError(f"signum takes no parameters, got {params}")
        v_in = np.array([0.0, 1e-9, 0.5])
        v_out = np.array([0.0, 1.0, 1.0])
    elif model == "scaled_tanh":
        gain = params.get("gain", 1.0)
        v_sat = params.get("v_sat", 1.0)
        extra = set(params) - {"gain", "v_sat"}
        if extra:
            raise DomainError(f"unknown scaled_tanh parameters {sorted(extra)}")
        if v_sat <= 0:
            raise DomainError(f"v_sat must be > 0, got {v_sat}")
        v_in = np.linspace(0.0, 3.0 * v_sat, 129)
        v_out = v_sat * np.tanh(gain * v_in / v_sat)
    elif model == "odd_polynomial":
        extra = set(params) - {"a1", "a3", "a5", "v_max"}
        if extra:
            raise DomainError(f"unknown odd_polynomial parameters {sorted(extra)}")
        v_max = params.get("v_max", 1.0)
        if v_max <= 0:
            raise DomainError(f"v_max must be > 0, got {v_max}")
        v_in = np.linspace(0.0, v_max, 129)
        v_out = (
            params.get("a1", 0.0) * v_in
            + params.get("a3", 0.0) * v_in**3
            + params.get("a5", 0.0) * v_in**5
        )
    else:
        raise DomainError(
            f"unknown model {model!r}, expected signum, scaled_tanh, or odd_polynomial"
        )
    return TransferCurve(v_in=v_in, v_out=v_out, r_ohm=r_ohm, label=model)


def _curve_from_coefficients(path: str, r_ohm: float) -> tuple[TransferCurve, float]:
    """Rebuild a transfer curve by summing the stored series on a voltage grid."""
    coeffs, _, label = load_coefficients(path)
    grid = np.linspace(0.0, coeffs.c, CURVE_POINTS)
    values = reconstruct(coeffs, grid)
    scale = float(np.max(np.abs(values.real)))
    worst_phase = float(np.max(np.abs(values.imag)))
    if worst_phase > 1e-9 * max(scale, 1e-300):
        raise DomainError(
            "coefficients describe an AM-PM (complex) response, which the "
            "time-domain oracle does not support; use a zero-phase device"
        )
    v_out = np.ascontiguousarray(values.real)
    # The odd series is exactly zero at the origin; drop the rounding residue
    # so the curve passes the origin check.
    v_out[0] = 0.0
    curve = TransferCurve(
        v_in=grid,
        v_out=v_out,
        r_ohm=r_ohm,
        label=label or Path(path).stem,
    )
    return curve, coeffs.c


def _load_input_spectrum(args: argparse.Namespace, path: str):
    with open(path, "r", encoding="utf-8") as handle:
        trace = parse_spectrum_csv(handle)
    linear = to_linear(
        trace,
        r_ohm=args.resistance,
        rbw_correction=getattr(args, "rbw_correction", False),
    )
    if getattr(args, "floor_clip", False):
        linear = subtract_noise_floor(linear)
    return linear


def _resolve_sigma(args: argparse.Namespace) -> float:
    if args.sigma is not None:
        return args.sigma
    return dbm_to_rms_volts(args.drive_dbm, args.resistance)


def cmd_fit_nonlinearity(args: argparse.Namespace) -> int:
    """Fit Fourier coefficients from a sweep CSV or a built-in model."""
    if (args.vna_csv is None) == (args.model is None):
        raise DomainError("provide either a sweep CSV path or --model, not both")
    n = args.n
    if args.model == "signum":
        if args.model_param:
            raise DomainError("signum takes no parameters")
        c = args.c if args.c is not None else 1.0
        coeffs = hard_limiter_coefficients(n=n, c=c)
        meta = {"construction": "closed-form", "model": "signum"}
        label = "signum"
    elif args.model is not None:
        c = args.c if args.c is not None else 1.0
        ext = analytic_model_samples(args.model, c=c, n=n, **_model_params(args))
        coeffs = fourier_coefficients_from_samples(ext)
        meta = dict(ext.extension_meta)
        label = args.model
    else:
        with open(args.vna_csv, "r", encoding="utf-8") as handle:
            sweep = parse_vna_csv(handle)
        label = Path(args.vna_csv).stem
        curve = s21_to_transfer_curve(sweep, r_ohm=args.resistance, label=label)
        ext = build_periodic_extension(curve, c=args.c, n=n)
        coeffs = fourier_coefficients_from_samples(ext)
        meta = dict(ext.extension_meta)

    out = _output_dir(args) / COEFFS_FILE
    save_coefficients(out, coeffs, meta, label)
    print(f"device: {label}")
    print(f"half period c: {coeffs.c!r} V, {coeffs.n} harmonics")
    if coeffs.recon_error is None:
        print("reconstruction error: none (closed form)")
    else:
        print(f"reconstruction error: {coeffs.recon_error:.3e}")
    print(f"wrote {out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    """Predict the output spectrum decomposition for one drive level."""
    coeffs, _, label = load_coefficients(args.coeffs)
    s_in = _load_input_spectrum(args, args.spectrum_csv)
    sigma = _resolve_sigma(args)
    weights = compute_weights(
        coeffs, sigma=sigma, beta=args.beta, k_max=args.k_max, strict=args.strict
    )
    components = predict_output_spectrum(weights, s_in, mode=args.mode)

    out_dir = _output_dir(args)
    spectrum_path = out_dir / SPECTRUM_FILE
    write_spectrum_csv(spectrum_path, components, r_ohm=args.resistance)

    report = build_report(components, weights, include_dc=args.include_dc)
    report["device"] = label
    report["settings"] = {
        "coeffs": args.coeffs,
        "spectrum_csv": args.spectrum_csv,
        "drive_dbm": args.drive_dbm,
        "sigma_v": sigma,
        "beta_v": args.beta,
        "k_max": weights.k_max,
        "mode": args.mode,
        "include_dc": args.include_dc,
        "floor_clip": args.floor_clip,
        "rbw_correction": args.rbw_correction,
        "strict": args.strict,
        "resistance_ohm": args.resistance,
    }
    report["files"] = {"spectrum_csv": SPECTRUM_FILE}
    _write_json(out_dir / PREDICT_REPORT_FILE, report)

    _print_warnings(report["warnings"])
    print(f"SDR: {report['sdr_db']:.4f} dB")
    print(f"wrote {spectrum_path}")
    print(f"wrote {out_dir / PREDICT_REPORT_FILE}")
    return 0


def cmd_sdr_sweep(args: argparse.Namespace) -> int:
    """Tabulate SDR against input power."""
    coeffs, _, label = load_coefficients(args.coeffs)
    rows = sdr_sweep(
        coeffs,
        args.start,
        args.stop,
        args.step,
        beta=args.beta,
        r_ohm=args.resistance,
        k_max=args.k_max,
        include_dc=args.include_dc,
        strict=args.strict,
    )
    k_max = "auto" if args.k_max is None else str(args.k_max)
    lines = [
        f"# device={label} beta_v={args.beta!r} k_max={k_max} "
        f"resistance_ohm={args.resistance!r} include_dc={args.include_dc}",
        "p_in_dbm,sigma_v,sdr_db,p_signal,p_distortion,error",
    ]
    for row in rows:
        lines.append(
            f"{row.p_in_dbm!r},{row.sigma_v!r},{row.sdr_db!r},"
            f"{row.p_signal!r},{row.p_distortion!r},{row.error or ''}"
        )
    out = _output_dir(args) / SWEEP_FILE
    atomic_write_text(out, "\n".join(lines) + "\n")
    print(f"{len(rows)} levels from {args.start} to {args.stop} dBm")
    print(f"wrote {out}")
    return 0


def cmd_validate_price(args: argparse.Namespace) -> int:
    """Compare limiter term powers with the arcsine series and report."""
    result = validate_price(n=args.n, k_max=args.k_max)
    print(f"{'k':>3}  {'term_power':>24}  {'reference':>24}  {'error':>12}")
    for k, t_k, ref, err in result.rows:
        print(f"{k:>3}  {t_k:>24.17g}  {ref:>24.17g}  {err:>12.3e}")
    odd_ok = result.max_odd_rel_error <= args.tol_odd
    even_ok = result.max_even_residual <= args.tol_even
    print(
        f"max odd-order relative error: {result.max_odd_rel_error:.3e} "
        f"(tolerance {args.tol_odd:g})"
    )
    print(
        f"max even-order residual:      {result.max_even_residual:.3e} "
        f"(tolerance {args.tol_even:g})"
    )
    print("PASS" if odd_ok and even_ok else "FAIL")
    return 0 if odd_ok and even_ok else 1


def cmd_oracle(args: argparse.Namespace) -> int:
    """Cross-validate the series prediction with a time-domain simulation."""
    if args.coeffs is not None:
        curve, c_stored = _curve_from_coefficients(args.coeffs, args.resistance)
        c = args.c if args.c is not None else c_stored
    else:
        curve = _model_transfer_curve(args.model, _model_params(args), args.resistance)
        c = args.c

    target = normalize_to_unit_area(_load_input_spectrum(args, args.target_csv))
    sigma = _resolve_sigma(args)
    cfg = OracleConfig(
        seed=args.seed,
        n_samples=args.n_samples,
        n_segments=args.n_segments,
        target=target,
        sigma=sigma,
    )
    report = run_oracle(
        curve,
        cfg,
        c=c,
        n=args.n,
        mode=args.mode,
        k_max=args.k_max,
        strict=args.strict,
    )
    report["settings"] = {
        "coeffs": args.coeffs,
        "model": args.model,
        "target_csv": args.target_csv,
        "drive_dbm": args.drive_dbm,
        "k_max": "auto" if args.k_max is None else args.k_max,
        "floor_clip": args.floor_clip,
        "rbw_correction": args.rbw_correction,
        "strict": args.strict,
        "resistance_ohm": args.resistance,
    }
    out = _output_dir(args) / ORACLE_REPORT_FILE
    _write_json(out, report)

    _print_warnings(report["warnings"])
    print(f"SDR predicted: {report['sdr_predicted_db']:.4f} dB")
    print(f"SDR simulated: {report['sdr_oracle_db']:.4f} dB")
    print(f"SDR delta: {report['sdr_delta_db']:+.4f} dB")
    print(f"worst band bin delta: {report['max_delta_db']:.4f} dB")
    print(f"wrote {out}")
    return 0


def _add_common(parser: argparse.ArgumentParser, *names: str) -> None:
    """Attach the shared flags a subcommand uses, keeping one definition each."""
    if "c" in names:
        parser.add_argument(
            "--c", type=float, default=None, metavar="VOLTS",
            help="half period of the odd extension (default: 4x the curve maximum)",
        )
    if "n" in names:
        parser.add_argument(
            "--n", type=int, default=DEFAULT_N, metavar="N",
            help=f"odd sample count for the extension grid (default {DEFAULT_N})",
        )
    if "k_max" in names:
        parser.add_argument(
            "--k-max", type=int, default=None, metavar="K",
            help="highest series order (default: automatic from convergence)",
        )
    if "drive" in names:
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument(
            "--drive-dbm", type=float, default=None, metavar="DBM",
            help="input power driving the device",
        )
        group.add_argument(
            "--sigma", type=float, default=None, metavar="VOLTS",
            help="input RMS voltage driving the device",
        )
    if "beta" in names:
        parser.add_argument(
            "--beta", type=float, default=0.0, metavar="VOLTS",
            help="DC bias applied at the device input (default 0)",
        )
    if "resistance" in names:
        parser.add_argument(
            "--resistance", type=float, default=50.0, metavar="OHM",
            help="reference resistance for power conversions (default 50)",
        )
    if "mode" in names:
        parser.add_argument(
            "--mode", choices=("same", "full"), default="same",
            help="convolution support: keep the input grid or grow it",
        )
    if "include_dc" in names:
        parser.add_argument(
            "--include-dc", action="store_true",
            help="count the DC term as distortion in SDR figures",
        )
    if "floor_clip" in names:
        parser.add_argument(
            "--floor-clip", action="store_true",
            help="subtract the noise floor from the input trace first",
        )
    if "rbw" in names:
        parser.add_argument(
            "--rbw-correction", action="store_true",
            help="rescale trace bins by bin width over resolution bandwidth",
        )
    if "strict" in names:
        parser.add_argument(
            "--strict", action="store_true",
            help="turn convergence and saturation warnings into errors",
        )
    if "out" in names:
        parser.add_argument(
            "--out", default=None, metavar="DIR",
            help="output directory (default: $CHFDIST_OUT or the working directory)",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chfdist",
        description="Predict spectra and SDR of Gaussian signals through "
        "memoryless nonlinear devices.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser(
        "fit-nonlinearity",
        help="derive Fourier coefficients from a sweep CSV or a named model",
    )
    p.add_argument(
        "vna_csv", nargs="?", default=None,
        help="S21 power sweep CSV (p_in_dbm,s21_mag_db,s21_phase_deg)",
    )
    p.add_argument(
        "--model", default=None,
        help="analytic device instead of a CSV: signum, scaled_tanh, odd_polynomial",
    )
    p.add_argument(
        "--model-param", action="append", metavar="NAME=VALUE",
        help="model parameter, repeatable (for example v_sat=0.3)",
    )
    _add_common(p, "c", "n", "resistance", "out")
    p.set_defaults(func=cmd_fit_nonlinearity)

    p = sub.add_parser(
        "predict",
        help="predict the output spectrum for coefficients and an input trace",
    )
    p.add_argument("coeffs", help="coefficients JSON from fit-nonlinearity")
    p.add_argument("spectrum_csv", help="input trace CSV (freq_hz,power_dbm)")
    _add_common(
        p, "drive", "beta", "k_max", "mode", "include_dc", "floor_clip",
        "rbw", "strict", "resistance", "out",
    )
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sdr-sweep", help="tabulate SDR against input power")
    p.add_argument("coeffs", help="coefficients JSON from fit-nonlinearity")
    p.add_argument("--start", type=float, required=True, metavar="DBM")
    p.add_argument("--stop", type=float, required=True, metavar="DBM")
    p.add_argument("--step", type=float, required=True, metavar="DB")
    _add_common(p, "beta", "k_max", "include_dc", "strict", "resistance", "out")
    p.set_defaults(func=cmd_sdr_sweep)

    p = sub.add_parser(
        "validate-price",
        help="check limiter term powers against their closed form",
    )
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--k-max", type=int, default=9)
    p.add_argument(
        "--tol-odd", type=float, default=PRICE_TOL_ODD,
        help="relative tolerance for odd orders",
    )
    p.add_argument(
        "--tol-even", type=float, default=PRICE_TOL_EVEN,
        help="absolute tolerance for even orders",
    )
    p.set_defaults(func=cmd_validate_price)

    p = sub.add_parser(
        "oracle",
        help="cross-validate a prediction with a time-domain simulation",
    )
    p.add_argument("target_csv", help="target input spectrum CSV (freq_hz,power_dbm)")
    device = p.add_mutually_exclusive_group(required=True)
    device.add_argument("--coeffs", default=None, help="coefficients JSON")
    device.add_argument(
        "--model", default=None,
        help="analytic device: signum, scaled_tanh, odd_polynomial",
    )
    p.add_argument(
        "--model-param", action="append", metavar="NAME=VALUE",
        help="model parameter, repeatable",
    )
    p.add_argument("--seed", type=int, default=0, help="simulation seed (default 0)")
    p.add_argument(
        "--n-samples", type=int, default=4096, metavar="N",
        help="samples per analysis segment, a power of two (default 4096)",
    )
    p.add_argument(
        "--n-segments", type=int, default=64, metavar="M",
        help="number of averaged segments (default 64)",
    )
    _add_common(
        p, "drive", "c", "n", "k_max", "mode", "floor_clip", "rbw",
        "strict", "resistance", "out",
    )
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename is not None else exc
        print(f"error: no such file: {name}", file=sys.stderr)
        return 2
    except ChfdistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
