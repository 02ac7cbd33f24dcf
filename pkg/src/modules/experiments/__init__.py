"""Experiment configuration, data sources, pipeline and result files"""
from .config import (
    SIMULATION_PRESETS,
    ExperimentConfig,
    RuntimeSettings,
    build_experiment_config,
    load_experiment_config,
)
from .ingest import ingest_csv
from .pipeline import PipelineReport, load_dataset, run_cell, run_dependence, run_pipeline, split_dataset
from .simulate import SimulationTruth, simulate_experiment

__all__ = [
    "SIMULATION_PRESETS",
    "ExperimentConfig",
    "RuntimeSettings",
    "build_experiment_config",
    "load_experiment_config",
    "ingest_csv",
    "PipelineReport",
    "load_dataset",
    "run_cell",
    "run_dependence",
    "run_pipeline",
    "split_dataset",
    "SimulationTruth",
    "simulate_experiment",
]
