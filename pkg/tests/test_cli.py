import numpy as np
import pytest
from click.testing import CliRunner

from svrg import io
from svrg.cli import main
from svrg.forecast import ForecastRecord

TINY = ["--set", "n_burnin=2", "--set", "n_draws=5", "--set", "log_every=0"]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def simulated_file(runner, tmp_path):
    path = tmp_path / "sim.csv"
    result = runner.invoke(main, ["simulate", str(path), "--n", "80", "--seed", "4"])
    assert result.exit_code == 0, result.output
    return path


def test_simulate(simulated_file):
    series = io.ingest(simulated_file)
    assert len(series) == 80
    assert simulated_file.read_text().splitlines()[0] == "date,y,r,sigma2,lambda"


def test_simulate_is_reproducible(runner, tmp_path, simulated_file):
    again = tmp_path / "again.csv"
    runner.invoke(main, ["simulate", str(again), "--n", "80", "--seed", "4"])
    assert again.read_bytes() == simulated_file.read_bytes()


def test_fit(runner, tmp_path, simulated_file):
    out = tmp_path / "fit"
    result = runner.invoke(
        main, ["fit", str(simulated_file), "--out", str(out), "--set", "keep_latent=1"] + TINY
    )
    assert result.exit_code == 0, result.output
    assert "chain 0" in result.output
    draws = (out / "draws.csv").read_text().splitlines()
    assert draws[0] == "chain,phi,omega_en,omega_nn,nu1,nu2,sigma2_next"
    assert len(draws) == 6
    assert (out / "report.txt").read_text() in result.output
    latent = (out / "latent.csv").read_text().splitlines()
    assert latent[0].startswith("date,sigma_mean")
    assert len(latent) == 81


def test_fit_two_chains(runner, tmp_path, simulated_file):
    out = tmp_path / "fit"
    result = runner.invoke(
        main, ["fit", str(simulated_file), "--out", str(out), "--set", "chains=2"] + TINY
    )
    assert result.exit_code == 0, result.output
    chains = [line.split(",")[0] for line in (out / "draws.csv").read_text().splitlines()[1:]]
    assert chains == ["0"] * 5 + ["1"] * 5


def test_unknown_key_exits_with_input_error(runner, simulated_file, tmp_path):
    result = runner.invoke(
        main, ["fit", str(simulated_file), "--out", str(tmp_path), "--set", "bogus=1"]
    )
    assert result.exit_code == 2


def test_forecast_and_compare(runner, tmp_path, simulated_file):
    out = tmp_path / "ewma"
    result = runner.invoke(
        main,
        ["forecast", str(simulated_file), "--window", "40", "--model", "ewma", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    records = io.read_forecasts(out / "forecasts.csv")
    assert len(records) == 40
    assert {record.model for record in records} == {"EWMA"}

    flat = tmp_path / "flat.csv"
    io.write_forecasts(flat, [ForecastRecord(record.date, 1.0, "FLAT") for record in records])
    report = tmp_path / "report.txt"
    result = runner.invoke(
        main,
        [
            "compare",
            str(simulated_file),
            str(out / "forecasts.csv"),
            str(flat),
            "--baseline",
            "FLAT",
            "--out",
            str(report),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "days: 40  baseline: FLAT\n" in result.output
    assert report.read_text() in result.output


def test_forecast_replays_file(runner, tmp_path, simulated_file):
    series = io.ingest(simulated_file)
    source = tmp_path / "rsv.csv"
    io.write_forecasts(
        source, [ForecastRecord(day, 2.0, "RSV") for day in series.dates[70:]]
    )
    out = tmp_path / "replay"
    result = runner.invoke(
        main,
        [
            "forecast",
            str(simulated_file),
            "--window",
            "70",
            "--model",
            "file",
            "--source",
            str(source),
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    replayed = io.read_forecasts(out / "forecasts.csv")
    assert [record.mean for record in replayed] == [2.0] * 10
    assert np.array_equal([record.date for record in replayed], series.dates[70:])


def test_forecast_file_needs_source(runner, tmp_path, simulated_file):
    result = runner.invoke(
        main, ["forecast", str(simulated_file), "--window", "70", "--model", "file"]
    )
    assert result.exit_code == 2


def test_forecast_rejects_long_window(runner, tmp_path, simulated_file):
    result = runner.invoke(
        main,
        ["forecast", str(simulated_file), "--window", "80", "--model", "ewma", "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
