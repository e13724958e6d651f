import logging
import sys
from collections import defaultdict
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional

import click
import numpy as np

from svrg import evaluation, io
from svrg.errors import SVRGError, exit_code
from svrg.forecast import (
    FileForecaster,
    ForecastRecord,
    Forecaster,
    ParkinsonEwmaForecaster,
    SvrgForecaster,
    rolling_forecast,
)
from svrg.mcmc import PosteriorDraws, run_chains, run_mcmc
from svrg.model import simulate_svrg
from svrg.settings import RunConfig, load_config

logger = logging.getLogger(__package__)

MODELS = ("svrg", "ewma", "file")


@contextmanager
def exit_on_error():
    try:
        yield
    except SVRGError as error:
        logger.error("%s", error)
        sys.exit(exit_code(error))


def settings(config_path: Optional[str], overrides, **values) -> RunConfig:
    given = {key: value for key, value in values.items() if value is not None}
    return load_config(config_path, overrides, **given)


def output_dir(path: str) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def config_options(fn):
    fn = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override one configuration key; may be repeated.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="key = value configuration file.",
    )(fn)
    fn = click.option("--seed", default=None, type=click.INT)(fn)
    return fn


@click.group()
@click.option("--verbose", is_flag=True, default=False)
def main(verbose):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO)


@main.command()
@click.argument("output", type=click.Path(dir_okay=False))
@click.option("--n", "n", default=None, type=click.INT, help="Number of days.")
@config_options
def simulate(output, n, seed, config_path, overrides):
    """Simulate returns, ranges and the latent path from the configured parameters."""
    with exit_on_error():
        config = settings(config_path, overrides, n=n, seed=seed).check()
        series, state = simulate_svrg(
            config.true_params, config.n, np.random.default_rng(config.seed), config.c_th
        )
        io.write_series(output, series, state)
        click.echo(f"{len(series)} days written to {output}")


def draw_columns(chains: List[PosteriorDraws]) -> Dict[str, np.ndarray]:
    columns: Dict[str, List[np.ndarray]] = defaultdict(list)
    for index, draws in enumerate(chains):
        columns["chain"].append(np.full(len(draws), index))
        for name, values in draws.columns().items():
            columns[name].append(values)
    return {name: np.concatenate(values) for name, values in columns.items()}


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Directory for draws and the run report.")
@config_options
def fit(input, out, seed, config_path, overrides):
    """Estimate the model by MCMC and write the draws and a run report."""
    with exit_on_error():
        config = settings(config_path, overrides, input=input, output=out, seed=seed)
        directory = output_dir(config.output)
        config = config.check()
        data = io.ingest(config.input, config.tick)
        if config.chains == 1:
            chains = [run_mcmc(data, config.priors, config.mcmc)]
        else:
            chains = run_chains(
                data,
                config.priors,
                config.mcmc,
                config.chains,
                config.workers,
                config.processes,
            )
        io.write_columns(directory / "draws.csv", draw_columns(chains))
        report = "\n".join(
            draws.report(f"chain {index}").render() for index, draws in enumerate(chains)
        )
        io.write_text(directory / "report.txt", report)
        bands = chains[0].latent_bands()
        if bands is not None:
            io.write_columns(directory / "latent.csv", bands, data.dates)
        click.echo(report, nl=False)


def build_forecaster(model: str, config: RunConfig, source: Optional[str]) -> Forecaster:
    if model == "svrg":
        return SvrgForecaster(config.priors, config.rolling_mcmc)
    if model == "ewma":
        return ParkinsonEwmaForecaster(config.decay)
    if source is None:
        raise click.UsageError("--model file needs --source")
    return FileForecaster.from_records(io.read_forecasts(source))


@main.command()
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.option("--window", default=None, type=click.INT, help="Estimation window in days.")
@click.option("--model", type=click.Choice(MODELS), default="svrg")
@click.option(
    "--source",
    default=None,
    type=click.Path(exists=True, dir_okay=False),
    help="Forecast file replayed by --model file.",
)
@click.option("--out", default=None, help="Directory for forecasts.csv.")
@config_options
def forecast(input, window, model, source, out, seed, config_path, overrides):
    """Rolling one-day-ahead variance forecasts."""
    with exit_on_error():
        config = settings(
            config_path, overrides, input=input, window=window, output=out, seed=seed
        )
        directory = output_dir(config.output)
        config = config.check()
        data = io.ingest(config.input, config.tick)
        records = rolling_forecast(
            data,
            config.window,
            build_forecaster(model, config, source),
            config.seed,
            config.workers,
            config.processes,
        )
        path = directory / "forecasts.csv"
        io.write_forecasts(path, records)
        click.echo(f"{len(records)} forecasts written to {path}")


def group_by_model(records: List[ForecastRecord]) -> Dict[str, List[ForecastRecord]]:
    grouped: Dict[str, List[ForecastRecord]] = defaultdict(list)
    for record in records:
        grouped[record.model].append(record)
    return grouped


@main.command()
@click.argument("proxy", type=click.Path(exists=True, dir_okay=False))
@click.argument("forecasts", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--baseline", default=None, help="Model the others are tested against.")
@click.option("--out", default=None, type=click.Path(dir_okay=False))
@config_options
def compare(proxy, forecasts, baseline, out, seed, config_path, overrides):
    """Average MSE and QLIKE losses with Giacomini–White p-values."""
    with exit_on_error():
        config = settings(config_path, overrides, input=proxy, seed=seed).check()
        series = io.ingest(config.input, config.tick)
        models: Dict[str, List[ForecastRecord]] = {}
        for path in forecasts:
            for model, records in group_by_model(io.read_forecasts(path)).items():
                if model in models:
                    logger.warning("model %s appears in several files, keeping %s", model, path)
                models[model] = records
        report = evaluation.compare_forecasts(models, series, baseline).render()
        if out is not None:
            io.write_text(out, report)
        click.echo(report, nl=False)
