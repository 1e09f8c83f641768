"""Command-line interface tests: wiring, exit codes, file outputs."""

from __future__ import annotations

import json
from importlib.resources import files

import numpy as np
import pytest

from chfdist.cli import main
from chfdist.nonlinearity import hard_limiter_coefficients, load_coefficients

VNA_CSV = str(files("chfdist") / "data" / "vna_zfl_like.csv")
FRAGMENTED_CSV = str(files("chfdist") / "data" / "fragmented_16sc.csv")


@pytest.fixture(scope="module")
def flat_band_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("inputs") / "flat_band.csv"
    lines = ["freq_hz,power_dbm"]
    for k in range(100, 117):
        lines.append(f"{k * 200.0!r},-30.00")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture(scope="module")
def signum_coeffs(tmp_path_factory):
    out = tmp_path_factory.mktemp("signum")
    code = main(["fit-nonlinearity", "--model", "signum", "--out", str(out)])
    assert code == 0
    return str(out / "coefficients.json")


@pytest.fixture(scope="module")
def tanh_coeffs(tmp_path_factory):
    out = tmp_path_factory.mktemp("tanh")
    code = main(
        [
            "fit-nonlinearity", "--model", "scaled_tanh",
            "--model-param", "v_sat=0.3", "--c", "1.2", "--out", str(out),
        ]
    )
    assert code == 0
    return str(out / "coefficients.json")


@pytest.fixture(scope="module")
def amplifier_coeffs(tmp_path_factory):
    out = tmp_path_factory.mktemp("amplifier")
    code = main(["fit-nonlinearity", VNA_CSV, "--out", str(out)])
    assert code == 0
    return str(out / "coefficients.json")


class TestFitNonlinearity:
    def test_vna_fit_reports_reconstruction_error(self, tmp_path, capsys):
        code = main(["fit-nonlinearity", VNA_CSV, "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "reconstruction error" in out
        coeffs, meta, label = load_coefficients(tmp_path / "coefficients.json")
        assert coeffs.n == 8001
        assert label == "vna_zfl_like"

    def test_signum_model_writes_closed_form(self, signum_coeffs):
        coeffs, meta, label = load_coefficients(signum_coeffs)
        reference = hard_limiter_coefficients(n=8001, c=1.0)
        np.testing.assert_array_equal(coeffs.coeffs, reference.coeffs)
        assert label == "signum"
        assert meta["construction"] == "closed-form"

    def test_csv_and_model_together_rejected(self, tmp_path, capsys):
        code = main(
            ["fit-nonlinearity", VNA_CSV, "--model", "signum", "--out", str(tmp_path)]
        )
        assert code == 2
        assert "not both" in capsys.readouterr().err

    def test_neither_source_rejected(self, tmp_path):
        assert main(["fit-nonlinearity", "--out", str(tmp_path)]) == 2

    def test_missing_file_names_path(self, tmp_path, capsys):
        code = main(["fit-nonlinearity", "no_such_sweep.csv", "--out", str(tmp_path)])
        assert code == 2
        assert "no_such_sweep.csv" in capsys.readouterr().err

    def test_unknown_model_rejected(self, tmp_path, capsys):
        code = main(["fit-nonlinearity", "--model", "cubic", "--out", str(tmp_path)])
        assert code == 2
        assert "cubic" in capsys.readouterr().err

    def test_bad_model_param_rejected(self, tmp_path):
        code = main(
            [
                "fit-nonlinearity", "--model", "scaled_tanh",
                "--model-param", "v_sat=soft", "--out", str(tmp_path),
            ]
        )
        assert code == 2


class TestPredict:
    def test_flat_band_prediction(self, signum_coeffs, flat_band_csv, tmp_path, capsys):
        code = main(
            [
                "predict", signum_coeffs, flat_band_csv,
                "--sigma", "0.1", "--out", str(tmp_path),
            ]
        )
        assert code == 0
        assert (tmp_path / "predicted_spectrum.csv").exists()
        report = json.loads((tmp_path / "predict_report.json").read_text())
        assert report["sdr_db"] > 0.0
        assert report["settings"]["sigma_v"] == 0.1
        assert report["settings"]["k_max"] == 99
        assert report["device"] == "signum"
        header = (tmp_path / "predicted_spectrum.csv").read_text().splitlines()[0]
        assert header.startswith("freq_hz,total_dbm,signal_dbm,distortion_dbm")
        assert "SDR" in capsys.readouterr().out

    def test_drive_dbm_converts_to_sigma(self, amplifier_coeffs, tmp_path):
        code = main(
            [
                "predict", amplifier_coeffs, FRAGMENTED_CSV,
                "--drive-dbm", "4.5", "--floor-clip", "--out", str(tmp_path),
            ]
        )
        assert code == 0
        report = json.loads((tmp_path / "predict_report.json").read_text())
        assert report["settings"]["drive_dbm"] == 4.5
        assert report["settings"]["sigma_v"] == pytest.approx(0.37539, rel=1e-4)

    def test_both_drive_flags_rejected(self, signum_coeffs, flat_band_csv):
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "predict", signum_coeffs, flat_band_csv,
                    "--sigma", "0.1", "--drive-dbm", "0.0",
                ]
            )
        assert excinfo.value.code == 2

    def test_neither_drive_flag_rejected(self, signum_coeffs, flat_band_csv):
        with pytest.raises(SystemExit) as excinfo:
            main(["predict", signum_coeffs, flat_band_csv])
        assert excinfo.value.code == 2

    def test_missing_coefficients_file(self, flat_band_csv, capsys):
        code = main(["predict", "missing.json", flat_band_csv, "--sigma", "0.1"])
        assert code == 2
        assert "missing.json" in capsys.readouterr().err

    def test_reruns_are_byte_identical(self, signum_coeffs, flat_band_csv, tmp_path):
        args = ["predict", signum_coeffs, flat_band_csv, "--sigma", "0.1"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert (a / "predicted_spectrum.csv").read_bytes() == (
            b / "predicted_spectrum.csv"
        ).read_bytes()
        assert (a / "predict_report.json").read_bytes() == (
            b / "predict_report.json"
        ).read_bytes()

    def test_stderr_warning_cap(self, signum_coeffs, flat_band_csv, tmp_path, capsys):
        code = main(
            [
                "predict", signum_coeffs, flat_band_csv,
                "--sigma", "0.1", "--out", str(tmp_path),
            ]
        )
        assert code == 0
        err = capsys.readouterr().err
        assert "more in the report" in err


class TestSdrSweep:
    def test_compressive_device_sdr_decreases(self, tanh_coeffs, tmp_path):
        code = main(
            [
                "sdr-sweep", tanh_coeffs, "--start", "-10", "--stop", "0",
                "--step", "5", "--out", str(tmp_path),
            ]
        )
        assert code == 0
        lines = (tmp_path / "sdr_sweep.csv").read_text().splitlines()
        assert lines[0].startswith("# device=scaled_tanh")
        assert lines[1] == "p_in_dbm,sigma_v,sdr_db,p_signal,p_distortion,error"
        sdr = [float(line.split(",")[2]) for line in lines[2:]]
        assert len(sdr) == 3
        assert sdr[0] > sdr[1] > sdr[2]

    def test_empty_range_rejected(self, tanh_coeffs, tmp_path, capsys):
        code = main(
            [
                "sdr-sweep", tanh_coeffs, "--start", "5", "--stop", "0",
                "--step", "1", "--out", str(tmp_path),
            ]
        )
        assert code == 2
        assert "empty" in capsys.readouterr().err

    def test_env_var_sets_output_dir(self, tanh_coeffs, tmp_path, monkeypatch):
        monkeypatch.setenv("CHFDIST_OUT", str(tmp_path / "from_env"))
        code = main(
            ["sdr-sweep", tanh_coeffs, "--start", "0", "--stop", "1", "--step", "1"]
        )
        assert code == 0
        assert (tmp_path / "from_env" / "sdr_sweep.csv").exists()


class TestValidatePrice:
    def test_default_run_passes(self, capsys):
        code = main(["validate-price", "--k-max", "5"])
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS" in out

    def test_under_resolved_grid_fails(self, capsys):
        code = main(["validate-price", "--n", "11"])
        out = capsys.readouterr().out
        assert code == 1
        assert "FAIL" in out

    def test_low_order_subset_passes(self):
        assert main(["validate-price", "--k-max", "3"]) == 0


class TestOracle:
    def test_signum_flat_band_agreement(self, flat_band_csv, tmp_path):
        code = main(
            [
                "oracle", flat_band_csv, "--model", "signum", "--sigma", "0.1",
                "--seed", "0", "--c", "1.0", "--k-max", "999",
                "--n-samples", "1024", "--n-segments", "256",
                "--out", str(tmp_path),
            ]
        )
        assert code == 0
        report = json.loads((tmp_path / "oracle_report.json").read_text())
        assert abs(report["sdr_delta_db"]) <= 0.5
        assert report["config"]["seed"] == 0

    def test_reruns_are_byte_identical(self, flat_band_csv, tmp_path):
        args = [
            "oracle", flat_band_csv, "--model", "signum", "--sigma", "0.1",
            "--seed", "3", "--c", "1.0", "--n-samples", "1024",
            "--n-segments", "64",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert (a / "oracle_report.json").read_bytes() == (
            b / "oracle_report.json"
        ).read_bytes()

    def test_complex_coefficients_rejected(self, amplifier_coeffs, flat_band_csv, capsys):
        code = main(
            [
                "oracle", flat_band_csv, "--coeffs", amplifier_coeffs,
                "--sigma", "0.1", "--seed", "0",
            ]
        )
        assert code == 2
        assert "AM-PM" in capsys.readouterr().err

    def test_zero_phase_coefficients_route(self, tanh_coeffs, flat_band_csv, tmp_path):
        code = main(
            [
                "oracle", flat_band_csv, "--coeffs", tanh_coeffs,
                "--sigma", "0.1", "--seed", "0", "--n-samples", "1024",
                "--n-segments", "16", "--out", str(tmp_path),
            ]
        )
        assert code == 0
        report = json.loads((tmp_path / "oracle_report.json").read_text())
        assert report["settings"]["coeffs"] == tanh_coeffs

    def test_model_and_coeffs_together_rejected(self, tanh_coeffs, flat_band_csv):
        with pytest.raises(SystemExit) as excinfo:
            main(
                [
                    "oracle", flat_band_csv, "--coeffs", tanh_coeffs,
                    "--model", "signum", "--sigma", "0.1",
                ]
            )
        assert excinfo.value.code == 2
