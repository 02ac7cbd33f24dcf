"""
Experiment pipeline: fit, predict and score every (model, holdout) cell, run
the dependence analysis when requested, and write the result files
"""
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

from modules.evaluation.holdout import HoldoutSpec, biased_pair_sample, make_holdout
from modules.evaluation.scoring import ScoreReport, score_predictions
from modules.inference.mcmc import PosteriorDraws, run_chain
from modules.inference.model import BivariateDataset, ModelFamily, Scenario
from modules.inference.predict import dependence_summary, empirical_dependence, log_intensity_surface, predict_responses
from modules.inference.priors import priors_from_config
from modules.spatial.domain_grid import GridApprox, build_grid
from utils.utils.exceptions import ConfigurationError, PipelineCellError, PrefSampleError
from utils.utils.performance_monitor import get_performance_monitor
from utils.utils.seeding import derive_int_seed

from . import results
from .config import ExperimentConfig, HoldoutConfig
from .ingest import ingest_csv
from .simulate import SimulationTruth, simulate_experiment

# stream keys under the experiment seed
SEED_HOLDOUT, SEED_CHAIN, SEED_PREDICT, SEED_DEPENDENCE = range(1, 5)


@dataclass(frozen=True)
class Cell:
    index: int
    model: ModelFamily
    holdout_index: int
    holdout: HoldoutConfig

    @property
    def label(self) -> str:
        return f"{self.model.value}/{self.holdout.strategy.label}/p={self.holdout.p:g}"

    def key(self) -> Dict[str, Any]:
        return {"model": self.model.value, "strategy": self.holdout.strategy.label, "p": self.holdout.p}


@dataclass
class CellResult:
    cell: Cell
    scores: Optional[ScoreReport] = None
    counts: Dict[str, int] = field(default_factory=dict)
    params: Optional[pd.DataFrame] = None
    intensity: Optional[pd.DataFrame] = None
    error: Optional[Tuple[str, str]] = None
    elapsed_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class PipelineReport:
    output_dir: Path
    n_cells: int
    n_failed: int
    files: List[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.n_failed == 0 else 1


def load_dataset(config: ExperimentConfig) -> Tuple[BivariateDataset, Optional[SimulationTruth]]:
    if config.data.source == "simulate":
        return simulate_experiment(config)
    return ingest_csv(config.data.csv.path, config.data.csv), None


def make_grid(config: ExperimentConfig, data: BivariateDataset) -> GridApprox:
    return build_grid(data.region, config.grid.resolution)


def cell_seed(config: ExperimentConfig, stream: int, holdout_index: int, model: ModelFamily) -> int:
    """Seed of one (model, holdout) cell; independent of which other models are configured"""
    return derive_int_seed(config.experiment.seed, stream, holdout_index, list(ModelFamily).index(model))


def holdout_spec(config: ExperimentConfig, holdout_index: int) -> HoldoutSpec:
    """Every model sees the same split of a given holdout"""
    h = config.holdouts[holdout_index]
    return HoldoutSpec(
        strategy=h.strategy,
        p=h.p,
        train_fraction=h.train_fraction,
        scenario=config.experiment.scenario,
        seed=derive_int_seed(config.experiment.seed, SEED_HOLDOUT, holdout_index),
    )


def split_dataset(config: ExperimentConfig, data: BivariateDataset, holdout_index: int) -> Tuple[BivariateDataset, BivariateDataset]:
    if not 0 <= holdout_index < len(config.holdouts):
        raise ConfigurationError(f"holdout index {holdout_index} out of range (0..{len(config.holdouts) - 1})")
    return make_holdout(data, holdout_spec(config, holdout_index))


def fit_model(
    config: ExperimentConfig,
    model: ModelFamily,
    train: BivariateDataset,
    seed: int,
    scenario: Optional[Scenario] = None,
    progress: bool = False,
) -> PosteriorDraws:
    return run_chain(
        scenario or config.experiment.scenario,
        model,
        train,
        config.mcmc.to_mcmc_config(seed, progress),
        grid=make_grid(config, train),
        priors=priors_from_config(config.priors),
        fix_response_mean=config.fix_response_mean,
        separable=config.experiment.separable,
    )


def _param_frame(draws: PosteriorDraws, cell: Cell, scenario: str, truth: Optional[SimulationTruth]) -> pd.DataFrame:
    frame = draws.summary()
    for key, value in cell.key().items():
        frame[key] = value
    frame["scenario"] = scenario
    frame["truth"] = [_truth_value(truth, name) for name in frame["parameter"]]
    return frame


def _truth_value(truth: Optional[SimulationTruth], name: str) -> float:
    """Generating value for a named parameter, NaN when the name has no simulated counterpart"""
    if truth is None:
        return float("nan")
    p = truth.params
    table: Dict[str, float] = {
        "gamma1": p["gamma"][0], "gamma2": p["gamma"][1],
        "tau2_1": p["tau2"][0], "tau2_2": p["tau2"][1],
        "a11": p["coreg"]["a11"], "a21": p["coreg"]["a21"], "a22": p["coreg"]["a22"],
        "sigma2_eta1": p["eta"]["sigma2"], "phi_eta1": p["eta"]["phi"],
        "sigma2_phi_eta1": p["eta"]["sigma2"] * p["eta"]["phi"],
        "phi_w1": p["w1"]["phi"], "phi_w2": p["w2"]["phi"],
        "a11sq_phi_w1": p["coreg"]["a11"] ** 2 * p["w1"]["phi"],
        "a22sq_phi_w2": p["coreg"]["a22"] ** 2 * p["w2"]["phi"],
    }
    eta2 = p.get("eta2")
    if eta2:
        table.update({"sigma2_eta2": eta2["sigma2"], "phi_eta2": eta2["phi"], "sigma2_phi_eta2": eta2["sigma2"] * eta2["phi"]})
    n_lgcp = 2 if eta2 else 1
    for k in range(n_lgcp):
        for i, a in enumerate(p["alpha"]):
            table[f"alpha{k + 1}_{i}"] = a
    if not p.get("fix_response_mean"):
        for j, key in ((1, "beta1"), (2, "beta2")):
            for i, b in enumerate(p[key]):
                table[f"beta{j}_{i}"] = b
    return float(table.get(name, float("nan")))


def run_cell(
    config: ExperimentConfig,
    data: BivariateDataset,
    cell: Cell,
    truth: Optional[SimulationTruth] = None,
    trace_dir: Optional[Path] = None,
) -> CellResult:
    """One (model, holdout) cell; failures are captured in the result, never raised"""
    start = time.perf_counter()
    scenario = config.experiment.scenario.value
    result = CellResult(cell=cell)
    try:
        train, test = split_dataset(config, data, cell.holdout_index)
        result.counts = {
            "n_train1": int(train.mask[:, 0].sum()), "n_train2": int(train.mask[:, 1].sum()),
            "n_test1": int(test.mask[:, 0].sum()), "n_test2": int(test.mask[:, 1].sum()),
        }
        draws = fit_model(config, cell.model, train, cell_seed(config, SEED_CHAIN, cell.holdout_index, cell.model))
        predictive = predict_responses(
            draws, train, test,
            seed=cell_seed(config, SEED_PREDICT, cell.holdout_index, cell.model),
            max_draws=config.prediction.max_draws,
        )
        result.scores = score_predictions(predictive, test)
        result.params = _param_frame(draws, cell, scenario, truth)
        if cell.model.has_shared_process:
            surface = log_intensity_surface(draws, train.covariates)
            for key, value in cell.key().items():
                surface[key] = value
            surface["scenario"] = scenario
            result.intensity = surface
        if trace_dir is not None:
            stem = f"{cell.model.value}_{cell.holdout.strategy.value}_p{cell.holdout.p:g}"
            draws.to_csv(trace_dir / f"{stem}.csv")
            draws.save(trace_dir / f"{stem}.npz")
        logger.info(f"Cell {cell.label} finished: CRPS sum {result.scores.crps_sum:.4f}")
    except PrefSampleError as e:
        logger.warning(f"Cell {cell.label} failed: {e}")
        result.error = (type(e).__name__, str(e))
    except Exception as e:  # noqa: BLE001
        logger.error(f"Cell {cell.label} crashed: {e}\n{traceback.format_exc()}")
        result.error = (type(e).__name__, str(e))
    result.elapsed_s = time.perf_counter() - start
    return result


def make_cells(config: ExperimentConfig) -> List[Cell]:
    cells = []
    for h_index, holdout in enumerate(config.holdouts):
        for model in config.experiment.models:
            cells.append(Cell(index=len(cells), model=model, holdout_index=h_index, holdout=holdout))
    return cells


def _run_cell_task(args):
    return run_cell(*args)


def run_cells(
    config: ExperimentConfig,
    data: BivariateDataset,
    truth: Optional[SimulationTruth],
    trace_dir: Optional[Path],
    workers: int = 1,
) -> List[CellResult]:
    cells = make_cells(config)
    tasks = [(config, data, cell, truth, trace_dir) for cell in cells]
    monitor = get_performance_monitor()
    if workers > 1 and len(cells) > 1:
        logger.info(f"Running {len(cells)} cells on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_run_cell_task, tasks))
    else:
        out = [_run_cell_task(task) for task in tasks]
    for r in out:
        monitor.record_latency(r.elapsed_s * 1000.0, "pipeline_cell")
    return sorted(out, key=lambda r: r.cell.index)


def score_rows(cell_results: List[CellResult], scenario: str) -> List[Dict[str, Any]]:
    rows = []
    for r in cell_results:
        if r.scores is None:
            continue
        rows.append({**r.cell.key(), "scenario": scenario, **r.counts, **r.scores.as_dict()})
    return rows


def error_rows(cell_results: List[CellResult], scenario: str) -> List[Dict[str, Any]]:
    return [
        {**r.cell.key(), "scenario": scenario, "error_type": r.error[0], "message": r.error[1]}
        for r in cell_results if not r.ok
    ]


@dataclass
class DependenceResult:
    per_draw: pd.DataFrame
    summary: pd.DataFrame
    local: pd.DataFrame


def run_dependence(
    config: ExperimentConfig,
    data: BivariateDataset,
    truth: Optional[SimulationTruth] = None,
) -> DependenceResult:
    """
    Fit the coregionalized models to the full data and/or the biased paired
    subsample, then summarize the cross-covariance per draw against the truth
    and the raw sample dependence
    """
    dep = config.dependence
    distances = np.linspace(0.0, dep.max_distance, dep.n_distances)
    paired_rows = np.flatnonzero(data.mask.all(axis=1))
    if paired_rows.size < data.n_sites:
        logger.info(f"Dependence analysis uses the {paired_rows.size} of {data.n_sites} sites observing both responses")
    paired = data.subset(paired_rows)
    samples = {
        "all": paired,
        "biased": biased_pair_sample(paired, dep.biased_fraction, dep.order_by - 1),
    }
    truth_curves = truth.dependence_curves(distances) if truth is not None else None
    truth_local = truth.local_dependence() if truth is not None else None

    per_draw, summaries, local = [], [], []
    for s_index, sample_name in enumerate(dep.samples):
        sample = samples[sample_name]
        raw = empirical_dependence(sample)
        for m_index, model in enumerate(dep.models):
            seed = derive_int_seed(config.experiment.seed, SEED_DEPENDENCE, s_index, m_index)
            draws = fit_model(config, model, sample, seed, scenario=Scenario.SHARED)
            summary = dependence_summary(draws, model, distances)
            summary.truth = truth_curves
            summary.truth_local = truth_local

            frame = summary.to_long_frame()
            frame.insert(0, "sample", sample_name)
            frame.insert(0, "model", model.value)
            per_draw.append(frame)

            curves = summary.curve_summary()
            curves.insert(0, "sample", sample_name)
            curves.insert(0, "model", model.value)
            summaries.append(curves)

            loc = summary.local_summary()
            loc.insert(0, "sample", sample_name)
            loc.insert(0, "model", model.value)
            loc["empirical"] = [raw["cov"], raw["corr"]]
            local.append(loc)
            logger.info(
                f"Dependence {model.value} on {sample_name} sample (n={sample.n_sites}): "
                f"local cov {summary.local_cov.mean():.3f} "
                f"[{np.quantile(summary.local_cov, 0.025):.3f}, {np.quantile(summary.local_cov, 0.975):.3f}]"
            )
    return DependenceResult(
        per_draw=results.concat_frames(per_draw, results.DEPENDENCE_COLUMNS),
        summary=results.concat_frames(summaries, results.DEPENDENCE_SUMMARY_COLUMNS),
        local=results.concat_frames(local, results.LOCAL_DEPENDENCE_COLUMNS),
    )


def write_dependence(result: DependenceResult, out: Path) -> List[Path]:
    return [
        results.write_csv(result.per_draw, out / "dependence.csv", results.DEPENDENCE_COLUMNS),
        results.write_csv(result.summary, out / "dependence_summary.csv", results.DEPENDENCE_SUMMARY_COLUMNS),
        results.write_csv(result.local, out / "local_dependence.csv", results.LOCAL_DEPENDENCE_COLUMNS),
    ]


def run_pipeline(config: ExperimentConfig, workers: Optional[int] = None) -> PipelineReport:
    """Run every cell, write scores.csv, params.csv, intensity.csv, errors.csv and the dependence files"""
    out = config.output_path
    out.mkdir(parents=True, exist_ok=True)
    scenario = config.experiment.scenario.value
    workers = workers or config.experiment.workers
    files: List[Path] = [results.write_yaml(config.model_dump(mode="json"), out / "config.resolved.yaml")]
    logger.info(f"Pipeline '{config.experiment.name}' ({scenario}) writing to {out}")

    data, truth = load_dataset(config)
    if truth is not None:
        truth.save(out / "truth.json")
        files.append(out / "truth.json")

    trace_dir = out / "traces" if config.experiment.save_traces else None
    cell_results = run_cells(config, data, truth, trace_dir, workers)

    files.append(results.write_csv(score_rows(cell_results, scenario), out / "scores.csv", results.SCORE_COLUMNS))
    files.append(results.write_csv(
        results.concat_frames([r.params for r in cell_results], results.PARAM_COLUMNS),
        out / "params.csv", results.PARAM_COLUMNS,
    ))
    intensity = [r.intensity for r in cell_results if r.intensity is not None]
    if intensity:
        files.append(results.write_csv(
            results.concat_frames(intensity, results.INTENSITY_COLUMNS), out / "intensity.csv", results.INTENSITY_COLUMNS,
        ))
    errors = error_rows(cell_results, scenario)

    if config.dependence.enabled:
        try:
            files += write_dependence(run_dependence(config, data, truth), out)
        except PrefSampleError as e:
            logger.warning(f"Dependence analysis failed: {e}")
            errors.append({"model": "dependence", "scenario": scenario, "strategy": "", "p": np.nan,
                           "error_type": type(e).__name__, "message": str(e)})

    files.append(results.write_csv(errors, out / "errors.csv", results.ERROR_COLUMNS))
    get_performance_monitor().log_summary(prefix=f"{config.experiment.name}: ")
    report = PipelineReport(output_dir=out, n_cells=len(cell_results), n_failed=len(errors), files=files)
    if report.n_failed:
        logger.warning(f"{report.n_failed} of {report.n_cells} cells failed; see {out / 'errors.csv'}")
    else:
        logger.info(f"Pipeline finished: {report.n_cells} cells")
    return report


def require_success(report: PipelineReport):
    if report.exit_code != 0:
        raise PipelineCellError(f"{report.n_failed} pipeline cell(s) failed")
