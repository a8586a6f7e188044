import json

import pandas as pd
import pytest

from ppsf_entanglement_lib import config_and_parser
from ppsf_entanglement_lib.config_and_parser import build_parser, main
from ppsf_entanglement_lib.number_crunchers import logger
from ppsf_entanglement_lib.number_crunchers.timetag_parser import read_ttag


def _report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


def _write_config(tmp_path, tree):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(tree))
    return str(path)


def test_budget_command(tmp_path):
    out = tmp_path / "budget"
    assert main(["budget", "--out", str(out)]) == 0

    report = _report(out)
    assert report["command"] == "budget"
    assert report["profile_version"] == "paper-default/1"
    assert "wall_time_s" not in report
    assert set(report["outputs"]) == {"budget.json"}
    assert logger.is_logged(str(out), "budget.json")

    budget = json.loads((out / "budget.json").read_text())
    assert set(budget["filter_sets"]) == {"dwdm_pair", "dwdm_pair+conjugate", "cl_splitter"}
    assert budget["consistency"]["within_factor_2"] is True
    assert budget["consistency"]["exceeds_pairs_per_nm"] is True
    assert budget["max_power_generation_rate"] == pytest.approx(2.8e6)
    assert report["metrics"]["generation_rate"]["value"] == pytest.approx(7e5)
    assert report["metrics"]["car_dwdm"]["provenance"] == ["photon_counting.rate_budget"]


def test_identical_runs_give_identical_reports(tmp_path):
    assert main(["budget", "--out", str(tmp_path / "a")]) == 0
    assert main(["budget", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()

    assert main(["budget", "--out", str(tmp_path / "c"), "--seed", "5"]) == 0
    assert _report(tmp_path / "c")["config_digest"] != _report(tmp_path / "a")["config_digest"]


def test_car_command(tmp_path):
    out = tmp_path / "car"
    assert main(["car", "--out", str(out), "--batches", "2", "--duration", "1", "--no-drift"]) == 0

    report = _report(out)
    assert set(report["outputs"]) == {"car_timeseries.csv", "car.svg", "histogram.csv", "histogram.svg",
                                      "batch.ttag"}
    assert report["metrics"]["n_batches"]["value"] == 2

    frame = pd.read_csv(out / "car_timeseries.csv")
    assert len(frame) == 2
    assert (frame["temperature_c"] == 34.0).all()
    assert sorted(read_ttag(str(out / "batch.ttag"))) == [1, 2]


def test_spectrum_command(tmp_path):
    config = _write_config(tmp_path, {"grid": {"points": 256}, "spectrometer": {"duration": 50.0}})
    out = tmp_path / "spectrum"
    assert main(["spectrum", "--config", config, "--profile", "lossless", "--out", str(out)]) == 0

    metrics = _report(out)["metrics"]
    assert metrics["fwhm_nm"]["value"] == pytest.approx(metrics["model_fwhm_nm"]["value"], rel=0.2)
    assert metrics["l1_error"]["value"] < 0.15
    spectrum = pd.read_csv(out / "spectrum.csv")
    assert list(spectrum.columns) == ["wavelength_nm", "intensity", "intensity_err"]
    assert (out / "spectrum.svg").read_text().lstrip().startswith("<?xml")


def test_tomography_command(tmp_path):
    config = _write_config(tmp_path, {"grid": {"points": 256},
                                      "tomography": {"bootstrap_resamples": 2, "acquisition_time": 5.0}})
    out = tmp_path / "tomo"
    assert main(["tomography", "--config", config, "--out", str(out)]) == 0

    report = _report(out)
    for name in ("tomography_record.csv", "rho_real.csv", "rho_imag.csv", "rho.json", "rho_real.svg",
                 "rho_imag.svg"):
        assert name in report["outputs"]
    concurrence = report["metrics"]["concurrence"]
    assert 0.0 <= concurrence["value"] <= 1.0
    assert concurrence["err"] is not None

    # The stored record reconstructs to the same state
    again = tmp_path / "again"
    assert main(["tomography", "--config", config, "--out", str(again),
                 "--record", str(out / "tomography_record.csv")]) == 0
    assert _report(again)["metrics"]["concurrence"]["value"] == pytest.approx(concurrence["value"], abs=1e-9)


def test_sweep_command(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--out", str(out), "--powers", "1,30", "--duration", "1"]) == 0
    frame = pd.read_csv(out / "sweep.csv")
    assert list(frame["power_mw"]) == [1.0, 30.0]
    metrics = _report(out)["metrics"]
    assert "car_at_1mw" in metrics and "car_at_30mw" in metrics
    assert metrics["points"]["value"] == 2


def test_exit_codes(tmp_path, capsys):
    assert main(["budget", "--out", str(tmp_path), "--power", "-1"]) == config_and_parser.EXIT_CONFIG
    assert "config error: pump: power ≥ 0 violated" in capsys.readouterr().err

    assert main(["spectrum", "--out", str(tmp_path), "--power", "0"]) == config_and_parser.EXIT_RUNTIME
    assert "EmptySpectrumError" in capsys.readouterr().err

    assert main(["budget", "--out", str(tmp_path), "--config", str(tmp_path / "missing.json")]) == config_and_parser.EXIT_IO
    assert main(["budget", "--out", str(tmp_path), "--profile", "tabletop"]) == config_and_parser.EXIT_CONFIG


@pytest.mark.parametrize("tree, field", [
    ({"pump": {"power": "abc"}}, "pump.power"),
    ({"grid": {"points": "many"}}, "grid.points"),
])
def test_wrongly_typed_config_exits_with_config_error(tmp_path, capsys, tree, field):
    config = _write_config(tmp_path, tree)
    assert main(["budget", "--config", config, "--out", str(tmp_path / "out")]) == config_and_parser.EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.startswith("config error:")
    assert field in err


def test_parser_rejects_bad_powers():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["sweep", "--powers", "1,x"])


def _small_runs(tmp_path, out):
    config = _write_config(tmp_path, {"grid": {"points": 128}, "spectrometer": {"duration": 60.0},
                                      "tomography": {"bootstrap_resamples": 2, "acquisition_time": 2.0}})
    assert main(["spectrum", "--config", config, "--out", str(out / "spectrum")]) == 0
    assert main(["tomography", "--config", config, "--out", str(out / "tomography")]) == 0
    assert main(["car", "--config", config, "--out", str(out / "car"), "--batches", "2", "--duration", "1"]) == 0


def test_fixed_seed_reruns_are_byte_identical(tmp_path):
    _small_runs(tmp_path, tmp_path / "a")
    _small_runs(tmp_path, tmp_path / "b")
    for command in ("spectrum", "tomography", "car"):
        first, second = tmp_path / "a" / command, tmp_path / "b" / command
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        assert "report.json" in names and "manifest.json" in names
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), f"{command}/{name}"


def test_output_schemas(tmp_path):
    _small_runs(tmp_path, tmp_path)

    report = _report(tmp_path / "tomography")
    assert sorted(report) == ["command", "config_digest", "metrics", "outputs", "profile_version", "seed",
                              "software_version"]
    for entry in report["metrics"].values():
        assert sorted(entry) == ["err", "provenance", "unit", "value"]
    for name, entry in report["outputs"].items():
        assert entry["path"] == name and len(entry["sha256"]) == 64
        assert logger.is_logged(str(tmp_path / "tomography"), name)

    headers = {
        "spectrum/spectrum.csv": ["wavelength_nm", "intensity", "intensity_err"],
        "tomography/tomography_record.csv": ["setting_s", "setting_i", "time_s", "coincidences", "singles_s",
                                             "singles_i"],
        "tomography/rho_real.csv": ["basis", "HH", "HV", "VH", "VV"],
        "tomography/rho_imag.csv": ["basis", "HH", "HV", "VH", "VV"],
        "car/car_timeseries.csv": ["batch", "time_h", "temperature_c", "pump_wavelength_nm", "coincidences",
                                   "accidentals", "coincidences_per_min", "car", "car_err", "car_predicted"],
        "car/histogram.csv": ["delay_ps", "counts"],
    }
    for name, columns in headers.items():
        assert list(pd.read_csv(tmp_path / name).columns) == columns, name

    rho = json.loads((tmp_path / "tomography" / "rho.json").read_text())
    assert sorted(rho) == ["basis", "elements", "is_physical"]
    assert rho["basis"] == ["HH", "HV", "VH", "VV"]
    assert len(rho["elements"]) == 16 and all(len(z) == 2 for z in rho["elements"])
    assert rho["is_physical"] is True


def test_default_spectrum_width(tmp_path):
    out = tmp_path / "spectrum"
    assert main(["spectrum", "--out", str(out)]) == 0
    metrics = _report(out)["metrics"]
    assert metrics["model_fwhm_nm"]["value"] == pytest.approx(101.0, abs=5.0)
    assert metrics["fwhm_nm"]["value"] == pytest.approx(101.0, abs=5.0)
    assert metrics["l1_error"]["value"] < 0.05


def test_default_tomography_quality(tmp_path):
    out = tmp_path / "tomo"
    assert main(["tomography", "--out", str(out)]) == 0
    metrics = _report(out)["metrics"]
    assert metrics["concurrence"]["value"] >= 0.96
    assert metrics["fidelity"]["value"] >= 0.975


def test_default_car_stability(tmp_path):
    out = tmp_path / "car"
    assert main(["car", "--out", str(out)]) == 0
    metrics = _report(out)["metrics"]
    assert metrics["n_batches"]["value"] == 10
    assert metrics["car_relative_std"]["value"] < 0.2

    frame = pd.read_csv(out / "car_timeseries.csv")
    assert len(frame) == 10
    assert frame["car"].between(1200.0, 4800.0).all()
