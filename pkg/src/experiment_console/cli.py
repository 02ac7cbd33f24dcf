"""
Experiment console: one click group wiring data sources, the sampler,
prediction, scoring and the dependence analysis to config files
"""
import sys
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv
from loguru import logger

# Load environment variables
load_dotenv()

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.evaluation.scoring import score_predictions  # noqa: E402
from modules.experiments import results  # noqa: E402
from modules.experiments.config import ExperimentConfig, RuntimeSettings, load_experiment_config  # noqa: E402
from modules.experiments.pipeline import (  # noqa: E402
    cell_seed,
    fit_model,
    load_dataset,
    run_dependence,
    run_pipeline,
    split_dataset,
    SEED_CHAIN,
    SEED_PREDICT,
    write_dependence,
)
from modules.inference.mcmc import PosteriorDraws  # noqa: E402
from modules.inference.model import ModelFamily  # noqa: E402
from modules.inference.predict import PredictiveDraws, predict_responses  # noqa: E402
from utils.utils.exceptions import PrefSampleError  # noqa: E402

LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {name}:{function} - <level>{message}</level>"


def configure_logging(verbose: bool, settings: RuntimeSettings, out_dir: Optional[Path] = None):
    """stderr sink at INFO (DEBUG with --verbose) plus a plain log file in the output directory"""
    level = "DEBUG" if verbose else settings.log_level.upper()
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    log_file = settings.log_file or (str(out_dir / "run.log") if out_dir is not None else None)
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, level="DEBUG", encoding="utf-8", enqueue=False)


class Context:
    def __init__(self, config_path: str, seed: Optional[int], out: Optional[str], profile: Optional[str], verbose: bool):
        self.settings = RuntimeSettings()
        self.config: ExperimentConfig = load_experiment_config(config_path, profile, seed, out)
        self.out = self.config.output_path
        self.verbose = verbose
        configure_logging(verbose, self.settings, self.out)
        logger.info(f"Loaded {config_path} (profile {profile or 'none'}, seed {self.config.experiment.seed})")

    def model(self, name: Optional[str]) -> ModelFamily:
        if name is None:
            return self.config.experiment.models[0]
        return ModelFamily(name)


def _common(f):
    f = click.option("--verbose", "-v", is_flag=True, help="Debug logging")(f)
    f = click.option("--profile", type=click.Choice(["smoke", "paper"]), default=None, help="Profile merged over the file")(f)
    f = click.option("--out", "out", type=click.Path(file_okay=False), default=None, help="Output directory")(f)
    f = click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Root seed")(f)
    f = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)(f)
    return f


def _open(config_path, seed, out, profile, verbose) -> Context:
    try:
        return Context(config_path, seed, out, profile, verbose)
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e


def _holdout_option(f):
    return click.option("--holdout", "holdout_index", type=int, default=0, show_default=True,
                        help="Index into the config's holdout list")(f)


@click.group()
def cli():
    """Preferential-sampling geostatistics experiments"""


@cli.command()
@_common
def simulate(config_path, seed, out, profile, verbose):
    """Simulate the configured dataset; writes data.csv and truth.json"""
    ctx = _open(config_path, seed, out, profile, verbose)
    try:
        data, truth = load_dataset(ctx.config)
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e
    path = results.write_csv(results.dataset_frame(data), ctx.out / "data.csv", results.DATASET_COLUMNS)
    if truth is not None:
        truth.save(ctx.out / "truth.json")
    click.echo(f"{data.n_sites} sites written to {path}")


@cli.command()
@_common
@_holdout_option
@click.option("--model", "model_name", type=click.Choice([m.value for m in ModelFamily]), default=None,
              help="Model family (default: first configured model)")
def fit(config_path, seed, out, profile, verbose, holdout_index, model_name):
    """Fit one model to the training part of a holdout; writes draws_<model>_h<k>.npz and traces"""
    ctx = _open(config_path, seed, out, profile, verbose)
    model = ctx.model(model_name)
    try:
        data, _ = load_dataset(ctx.config)
        train, _ = split_dataset(ctx.config, data, holdout_index)
        chain_seed = cell_seed(ctx.config, SEED_CHAIN, holdout_index, model)
        draws = fit_model(ctx.config, model, train, chain_seed, progress=ctx.settings.progress or verbose)
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e
    stem = f"draws_{model.value}_h{holdout_index}"
    draws.save(ctx.out / f"{stem}.npz")
    draws.to_csv(ctx.out / f"{stem}.csv")
    results.write_csv(draws.summary(), ctx.out / f"{stem}_summary.csv", list(draws.summary().columns))
    click.echo(f"{draws.n_draws} draws of {model.value} written to {ctx.out / (stem + '.npz')}")


@cli.command()
@_common
@_holdout_option
@click.option("--draws", "draws_path", type=click.Path(exists=True, dir_okay=False), required=True)
def predict(config_path, seed, out, profile, verbose, holdout_index, draws_path):
    """Posterior predictive draws at the test sites of a holdout"""
    ctx = _open(config_path, seed, out, profile, verbose)
    try:
        draws = PosteriorDraws.load(draws_path)
        data, _ = load_dataset(ctx.config)
        train, test = split_dataset(ctx.config, data, holdout_index)
        predictive = predict_responses(
            draws, train, test,
            seed=cell_seed(ctx.config, SEED_PREDICT, holdout_index, ModelFamily(draws.family)),
            max_draws=ctx.config.prediction.max_draws,
        )
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e
    stem = f"predictive_{draws.family}_h{holdout_index}"
    predictive.save(ctx.out / f"{stem}.npz")
    results.write_csv(predictive.to_long_frame(), ctx.out / f"{stem}.csv", results.PREDICTION_COLUMNS)
    click.echo(f"Predictions for {len(test.sites)} test sites written to {ctx.out / (stem + '.npz')}")


@cli.command()
@_common
@_holdout_option
@click.option("--predictions", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
def score(config_path, seed, out, profile, verbose, holdout_index, pred_path):
    """RMSE and CRPS of saved predictive draws against the holdout's test responses"""
    ctx = _open(config_path, seed, out, profile, verbose)
    try:
        predictive = PredictiveDraws.load(pred_path)
        data, _ = load_dataset(ctx.config)
        train, test = split_dataset(ctx.config, data, holdout_index)
        report = score_predictions(predictive, test)
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e
    holdout = ctx.config.holdouts[holdout_index]
    row = {
        "model": predictive.family,
        "scenario": ctx.config.experiment.scenario.value,
        "strategy": holdout.strategy.label,
        "p": holdout.p,
        "n_train1": int(train.mask[:, 0].sum()), "n_train2": int(train.mask[:, 1].sum()),
        "n_test1": int(test.mask[:, 0].sum()), "n_test2": int(test.mask[:, 1].sum()),
        **report.as_dict(),
    }
    path = results.write_csv([row], ctx.out / f"scores_{predictive.family}_h{holdout_index}.csv", results.SCORE_COLUMNS)
    click.echo(f"RMSE sum {report.rmse_sum:.4f}, CRPS sum {report.crps_sum:.4f} -> {path}")


@cli.command()
@_common
def dependence(config_path, seed, out, profile, verbose):
    """Cross-covariance analysis of the coregionalized models on the full and biased samples"""
    ctx = _open(config_path, seed, out, profile, verbose)
    try:
        data, truth = load_dataset(ctx.config)
        paths = write_dependence(run_dependence(ctx.config, data, truth), ctx.out)
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e
    click.echo("Wrote " + ", ".join(str(p) for p in paths))


@cli.command()
@_common
@click.option("--workers", type=click.IntRange(1), default=None, help="Worker processes for pipeline cells")
def pipeline(config_path, seed, out, profile, verbose, workers):
    """Every (model, holdout) cell plus the dependence analysis; exits 1 if any cell failed"""
    ctx = _open(config_path, seed, out, profile, verbose)
    try:
        report = run_pipeline(ctx.config, workers=workers or ctx.settings.workers)
    except PrefSampleError as e:
        raise click.ClickException(str(e)) from e
    click.echo(f"{report.n_cells} cells, {report.n_failed} failed; results in {report.output_dir}")
    sys.exit(report.exit_code)


if __name__ == "__main__":
    cli()
