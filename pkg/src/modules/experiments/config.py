"""
Experiment configuration: pydantic models over the YAML document read by
ConfigLoader, simulation presets for the study designs, and process-level
runtime settings from the environment
"""
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from modules.evaluation.holdout import HoldoutStrategy
from modules.inference.mcmc import McmcConfig
from modules.inference.model import ModelFamily, Scenario
from utils.utils.config_loader import ConfigLoader, deep_merge
from utils.utils.exceptions import ConfigurationError

SIMULATION_PRESETS: Dict[str, Dict[str, Any]] = {
    "low_variance": {"eta": {"sigma2": 1.0 / 3.0, "phi": 3.0}},
    "high_variance": {"eta": {"sigma2": 1.0, "phi": 3.0}},
    "disjoint_low": {"eta": {"sigma2": 1.0 / 3.0, "phi": 3.0}, "eta2": {"sigma2": 1.0 / 3.0, "phi": 3.0}},
    "disjoint_high": {"eta": {"sigma2": 1.0, "phi": 3.0}, "eta2": {"sigma2": 1.0, "phi": 3.0}},
    "dependence_data1": {
        "alpha": [6.0],
        "covariates": "intercept",
        "fix_response_mean": True,
        "eta": {"sigma2": 1.0, "phi": 1.0},
        "gamma": [1.0, 0.3],
        "coreg": {"a11": 1.0, "a21": -0.4, "a22": 1.0},
        "w1": {"sigma2": 1.0, "phi": 1.0},
        "w2": {"sigma2": 1.0, "phi": 1.0},
    },
    "dependence_data2": {
        "alpha": [6.0],
        "covariates": "intercept",
        "fix_response_mean": True,
        "eta": {"sigma2": 1.0, "phi": 1.0},
        "gamma": [1.0, -0.3],
        "coreg": {"a11": 1.0, "a21": -0.4, "a22": 1.0},
        "w1": {"sigma2": 1.0, "phi": 1.0},
        "w2": {"sigma2": 1.0, "phi": 1.0},
    },
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KernelConfig(_Section):
    sigma2: float = Field(1.0, gt=0)
    phi: float = Field(3.0, gt=0)


class CoregConfig(_Section):
    a11: float = Field(0.0, ge=0)
    a21: float = 0.0
    a22: float = Field(0.0, ge=0)


class RegionConfig(_Section):
    xmin: float = 0.0
    xmax: float = 1.0
    ymin: float = 0.0
    ymax: float = 1.0

    @model_validator(mode="after")
    def _positive_area(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("region must have positive width and height")
        return self


class SimulationConfig(_Section):
    """Truth for simulated data; defaults are the low-variance shared-process design"""
    preset: Optional[str] = None
    alpha: List[float] = Field(default_factory=lambda: [6.0, 1.0])
    eta: KernelConfig = Field(default_factory=lambda: KernelConfig(sigma2=1.0 / 3.0, phi=3.0))
    eta2: Optional[KernelConfig] = None
    beta1: List[float] = Field(default_factory=lambda: [0.0, 0.5])
    beta2: List[float] = Field(default_factory=lambda: [0.0, 0.5])
    gamma: Tuple[float, float] = (1.0, 0.3)
    coreg: CoregConfig = Field(default_factory=CoregConfig)
    w1: KernelConfig = Field(default_factory=lambda: KernelConfig(sigma2=1.0, phi=1.0))
    w2: KernelConfig = Field(default_factory=lambda: KernelConfig(sigma2=1.0, phi=1.0))
    tau2: Tuple[float, float] = (0.3, 0.1)
    covariates: Literal["centered_y", "intercept"] = "centered_y"
    fix_response_mean: bool = False

    @model_validator(mode="before")
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("preset"):
            name = data["preset"]
            if name not in SIMULATION_PRESETS:
                raise ValueError(f"unknown preset '{name}'; available: {sorted(SIMULATION_PRESETS)}")
            return deep_merge(SIMULATION_PRESETS[name], data)
        return data

    @field_validator("tau2")
    @classmethod
    def _positive_nuggets(cls, value):
        if min(value) <= 0:
            raise ValueError("tau2 entries must be positive")
        return value

    @model_validator(mode="after")
    def _consistent_dimensions(self):
        p = 2 if self.covariates == "centered_y" else 1
        if len(self.alpha) != p:
            raise ValueError(f"alpha needs {p} coefficients for covariates '{self.covariates}'")
        if not self.fix_response_mean and (len(self.beta1) != p or len(self.beta2) != p):
            raise ValueError(f"beta1 and beta2 need {p} coefficients for covariates '{self.covariates}'")
        return self


class CsvConfig(_Section):
    path: str
    easting: str = "easting"
    northing: str = "northing"
    y1: str = "y1"
    y2: str = "y2"
    covariates: List[str] = Field(default_factory=list)
    log_transform: Tuple[bool, bool] = (False, False)


class DataConfig(_Section):
    source: Literal["simulate", "csv"] = "simulate"
    simulation: Optional[SimulationConfig] = None
    csv: Optional[CsvConfig] = None

    @model_validator(mode="after")
    def _one_source(self):
        if self.source == "simulate":
            if self.csv is not None:
                raise ValueError("data.csv must be absent when source is 'simulate'")
            if self.simulation is None:
                self.simulation = SimulationConfig()
        elif self.csv is None or self.simulation is not None:
            raise ValueError("source 'csv' needs data.csv and no data.simulation")
        return self


class HoldoutConfig(_Section):
    strategy: HoldoutStrategy
    p: float = Field(0.2, ge=0.0, le=1.0)
    train_fraction: float = Field(0.5, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _p_within_train(self):
        if self.p > self.train_fraction:
            raise ValueError(f"p={self.p} exceeds train_fraction={self.train_fraction}")
        return self


class DependenceConfig(_Section):
    enabled: bool = False
    biased_fraction: float = Field(0.7, gt=0.0, le=1.0)
    order_by: Literal[1, 2] = 1
    max_distance: float = Field(1.0, gt=0.0)
    n_distances: int = Field(51, ge=2)
    models: List[ModelFamily] = Field(default_factory=lambda: [ModelFamily.M3, ModelFamily.M4])
    samples: List[Literal["all", "biased"]] = Field(default_factory=lambda: ["all", "biased"])

    @field_validator("models")
    @classmethod
    def _coregionalized_only(cls, value):
        bad = [m.value for m in value if m not in (ModelFamily.M3, ModelFamily.M4)]
        if bad:
            raise ValueError(f"dependence analysis supports M3 and M4 only, got {bad}")
        return value


class McmcSection(_Section):
    n_burn: int = Field(10000, ge=0)
    n_keep: int = Field(20000, ge=0)
    thin: int = Field(1, ge=1)
    field_thin: int = Field(10, ge=1)
    step_log_sigma2: float = Field(0.3, ge=0)
    step_logit_phi: float = Field(0.3, ge=0)
    step_alpha: float = Field(0.1, ge=0)
    target_ess: float = Field(200.0, gt=0)
    adapt: bool = True
    target_accept: float = Field(0.3, gt=0, lt=1)
    conjugate_variance: bool = True
    sample_gamma: bool = True

    def to_mcmc_config(self, seed: Optional[int], progress: bool = False) -> McmcConfig:
        return McmcConfig(seed=seed, progress=progress, **self.model_dump())


class GridConfig(_Section):
    resolution: int = Field(30, ge=1)
    region: Optional[RegionConfig] = None


class PredictionConfig(_Section):
    max_draws: Optional[int] = Field(200, ge=1)


class ExperimentSection(_Section):
    name: str = "experiment"
    seed: int = Field(2024, ge=0)
    scenario: Scenario = Scenario.SHARED
    models: List[ModelFamily] = Field(
        default_factory=lambda: [ModelFamily.M1, ModelFamily.M2, ModelFamily.M3, ModelFamily.M4]
    )
    output_dir: str = "results"
    workers: int = Field(1, ge=1)
    separable: bool = False
    save_traces: bool = True


class ExperimentConfig(_Section):
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    grid: GridConfig = Field(default_factory=GridConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    holdouts: List[HoldoutConfig] = Field(
        default_factory=lambda: [
            HoldoutConfig(strategy=HoldoutStrategy.RANDOM, p=0.2),
            HoldoutConfig(strategy=HoldoutStrategy.DESCENDING_Y1, p=0.2),
            HoldoutConfig(strategy=HoldoutStrategy.DESCENDING_Y2, p=0.2),
        ]
    )
    dependence: DependenceConfig = Field(default_factory=DependenceConfig)
    mcmc: McmcSection = Field(default_factory=McmcSection)
    priors: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    prediction: PredictionConfig = Field(default_factory=PredictionConfig)

    @model_validator(mode="after")
    def _models_fit_scenario(self):
        scenario = self.experiment.scenario
        bad = [m.value for m in self.experiment.models if not m.allowed_in(scenario)]
        if bad:
            raise ValueError(f"models {bad} are not defined for the {scenario.value} scenario")
        if self.dependence.enabled and scenario is Scenario.DISJOINT:
            raise ValueError("dependence analysis needs paired responses (shared or overlapping scenario)")
        return self

    @property
    def output_path(self) -> Path:
        return Path(self.experiment.output_dir)

    @property
    def fix_response_mean(self) -> bool:
        sim = self.data.simulation
        return bool(sim is not None and sim.fix_response_mean)


class RuntimeSettings(BaseSettings):
    """Process-level knobs read from PREFSAMPLE_* environment variables or .env"""
    model_config = SettingsConfigDict(env_prefix="PREFSAMPLE_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    log_file: Optional[str] = None
    workers: Optional[int] = None
    progress: bool = False


def build_experiment_config(raw: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except PydanticValidationError as e:
        logger.error(f"Invalid experiment configuration: {e}")
        raise ConfigurationError(f"Invalid experiment configuration: {e}") from e


def load_experiment_config(
    path: str,
    profile: Optional[str] = None,
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> ExperimentConfig:
    """Read, profile-merge and validate an experiment file; CLI flags override file values"""
    raw = ConfigLoader().load(path, profile)
    overrides: Dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if output_dir is not None:
        overrides["output_dir"] = output_dir
    if overrides:
        raw = deep_merge(raw, {"experiment": overrides})
    return build_experiment_config(raw)
