"""
Contains the configuration options for the enflow command line
"""

import json
import logging
import os
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from enflow.errors import ConfigError
from enflow.metrics.coverage import default_delta
from enflow.nn.config import FeaturizerConfig, NetConfig
from enflow.sampling.config import CertMode, SamplerConfig
from enflow.synthetic import SyntheticSpec
from enflow.training.config import TrainConfig

LOG_LEVELS: tuple[str, ...] = ("error", "warning", "info", "debug")
LOG_ENV_VAR: str = "ENFLOW_LOG"


class DataSection(BaseModel):
    """Synthetic dataset shape, dataset tag and split"""

    model_config = ConfigDict(frozen=True)

    synthetic: SyntheticSpec = SyntheticSpec()
    tag: str = "drugs"
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    max_conformers: int = 30

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        self.synthetic.check()
        if any(f < 0 for f in self.split) or not sum(self.split) > 0:
            raise ConfigError(f"Split fractions must be non-negative with a positive sum, got {self.split}")
        if self.max_conformers < 1:
            raise ConfigError(f"max_conformers must be at least 1, got {self.max_conformers}")


class ModelSection(BaseModel):
    """Shared shape of the vector-field and energy networks"""

    model_config = ConfigDict(frozen=True)

    hidden: int = 64
    n_layers: int = 3
    n_atom_types: int = 8
    time_freqs: int = 4
    featurizer: FeaturizerConfig = FeaturizerConfig()

    def _shape(self) -> dict[str, Any]:
        return {
            "hidden": self.hidden,
            "n_layers": self.n_layers,
            "n_atom_types": self.n_atom_types,
            "time_freqs": self.time_freqs,
            "featurizer": self.featurizer,
        }

    def theta_config(self) -> NetConfig:
        """Configuration of the vector field v_theta"""
        return NetConfig.vector_field(**self._shape())

    def phi_config(self) -> NetConfig:
        """Configuration of the energy model J_phi"""
        return NetConfig.energy_model(**self._shape())

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        self.theta_config().check()


class SampleSection(BaseModel):
    """Sampling and certification settings"""

    model_config = ConfigDict(frozen=True)

    n_steps: int = 5
    amplitude: float | None = None
    guided: bool = True
    samples_per_reference: int = 2
    mode: CertMode = CertMode.ENSEMBLECERT
    ensemble_size: int = 20

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.amplitude is not None and self.amplitude < 0:
            raise ConfigError(f"amplitude must be non-negative, got {self.amplitude}")
        if self.samples_per_reference < 1:
            raise ConfigError("samples_per_reference must be at least 1")
        if self.ensemble_size < 1:
            raise ConfigError(f"ensemble_size must be at least 1, got {self.ensemble_size}")

    def sampler(self, dataset_tag: str, seed: int) -> SamplerConfig:
        """Sampler configuration; without an explicit amplitude the tag's table is used"""
        if self.amplitude is None:
            return SamplerConfig.for_dataset(dataset_tag, self.n_steps, self.guided, seed)
        return SamplerConfig(
            n_steps=self.n_steps, amplitude=self.amplitude, guided=self.guided, seed=seed
        )

    def certifier(self, seed: int) -> SamplerConfig:
        """Guided configuration of the certification mode"""
        if self.amplitude is None:
            return SamplerConfig.for_mode(self.mode, self.n_steps, seed)
        return SamplerConfig(n_steps=self.n_steps, amplitude=self.amplitude, guided=True, seed=seed)


class EvalSection(BaseModel):
    """Coverage threshold and ablation studies; ablation_reflow_steps=0 skips the reflow study"""

    model_config = ConfigDict(frozen=True)

    delta: float | None = None
    delta_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
    ablation_steps: tuple[int, ...] = (1, 2, 5)
    ablation_amplitudes: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.5)
    ablation_ensemble_sizes: tuple[int, ...] = (1, 5, 20)
    ablation_reflow_steps: int = 100

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if self.delta is not None and not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if any(not d > 0 for d in self.delta_grid):
            raise ConfigError("Every delta of the grid must be positive")
        if any(n < 1 for n in self.ablation_steps):
            raise ConfigError("Ablation step counts must be at least 1")
        if any(a < 0 for a in self.ablation_amplitudes):
            raise ConfigError("Ablation amplitudes must be non-negative")
        if any(m < 1 for m in self.ablation_ensemble_sizes):
            raise ConfigError("Ablation ensemble sizes must be at least 1")
        if self.ablation_reflow_steps < 0:
            raise ConfigError(f"ablation_reflow_steps must be non-negative, got {self.ablation_reflow_steps}")

    def resolved_delta(self, dataset_tag: str) -> float:
        """delta, or the tag's default threshold"""
        return self.delta if self.delta is not None else default_delta(dataset_tag)


class Settings(BaseSettings):
    """Settings class for the enflow command line"""

    model_config = SettingsConfigDict(
        env_prefix="ENFLOW_", env_nested_delimiter="__", frozen=True
    )

    SEED: int = 0
    OUT_DIR: Path = Path("out")
    WORKERS: int = 1
    LOG_LEVEL: str | None = None

    DATA: DataSection = DataSection()
    MODEL: ModelSection = ModelSection()
    TRAIN: TrainConfig = TrainConfig()
    SAMPLE: SampleSection = SampleSection()
    EVAL: EvalSection = EvalSection()

    # Output files
    DATASET_FILE: str = "dataset.jsonl"
    CHECKPOINT_FILE: str = "checkpoint.enflow"
    HISTORY_FILE: str = "history.csv"
    GENERATED_FILE: str = "generated.jsonl"
    PREDICTIONS_FILE: str = "predictions.jsonl"
    GROUND_STATE_FILE: str = "ground_state.csv"
    METRICS_CSV_FILE: str = "metrics.csv"
    METRICS_JSON_FILE: str = "metrics.json"
    ABLATION_FILE: str = "ablation.csv"
    LOGGING_DIR: str = "logs"

    def check(self) -> None:
        """
        Validate every section and their cross-constraints.

        Raises:
            ConfigError: a field is out of range
        """
        if self.WORKERS < 1:
            raise ConfigError(f"WORKERS must be at least 1, got {self.WORKERS}")
        if self.LOG_LEVEL is not None and self.LOG_LEVEL.lower() not in LOG_LEVELS:
            raise ConfigError(f"LOG_LEVEL must be one of {LOG_LEVELS}, got '{self.LOG_LEVEL}'")
        self.DATA.check()
        self.MODEL.check()
        self.TRAIN.check()
        self.SAMPLE.check()
        self.EVAL.check()
        if self.DATA.synthetic.n_atom_types > self.MODEL.n_atom_types:
            raise ConfigError(
                f"The model embeds {self.MODEL.n_atom_types} atom types, "
                + f"the dataset uses {self.DATA.synthetic.n_atom_types}"
            )

    def log_level(self) -> str:
        """LOG_LEVEL, else the ENFLOW_LOG variable, else info"""
        level = self.LOG_LEVEL or os.getenv(LOG_ENV_VAR) or "info"
        if level.lower() not in LOG_LEVELS:
            raise ConfigError(f"{LOG_ENV_VAR} must be one of {LOG_LEVELS}, got '{level}'")
        return level.lower()

    def out_path(self, name: str) -> Path:
        """Path of an output file inside OUT_DIR"""
        return self.OUT_DIR / name

    def with_overrides(
        self,
        seed: int | None = None,
        out_dir: Path | None = None,
        workers: int | None = None,
        steps: int | None = None,
        amplitude: float | None = None,
        mode: str | None = None,
        ensemble_size: int | None = None,
        delta: float | None = None,
        guided: bool | None = None,
    ) -> "Settings":
        """Copy with the command-line flags that were given applied on top"""
        top: dict[str, Any] = {}
        sample: dict[str, Any] = {}
        if seed is not None:
            top["SEED"] = seed
            top["TRAIN"] = self.TRAIN.model_copy(update={"seed": seed})
        if out_dir is not None:
            top["OUT_DIR"] = out_dir
        if workers is not None:
            top["WORKERS"] = workers
        if steps is not None:
            sample["n_steps"] = steps
        if amplitude is not None:
            sample["amplitude"] = amplitude
        if mode is not None:
            sample["mode"] = CertMode.parse(mode)
        if ensemble_size is not None:
            sample["ensemble_size"] = ensemble_size
        if guided is not None:
            sample["guided"] = guided
        if sample:
            top["SAMPLE"] = self.SAMPLE.model_copy(update=sample)
        if delta is not None:
            top["EVAL"] = self.EVAL.model_copy(update={"delta": delta})
        return self.model_copy(update=top)

    @classmethod
    def load_from_file(cls, path: Path) -> "Settings":
        """
        Loads settings from a JSON file.

        Raises:
            FileNotFoundError: the file does not exist
            ConfigError: the file is not valid JSON or fails validation
        """
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")

        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            settings = cls(**data)
        except (json.JSONDecodeError, ValidationError, TypeError) as e:
            logging.getLogger("Config").error("Error loading settings: %s", e)
            raise ConfigError(f"Invalid config file {path}: {e}") from e
        settings.check()
        return settings

    def save_to_file(self, path: Path):
        """Saves settings to JSON file."""
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, "w", encoding="utf-8") as f:
                _ = f.write(self.model_dump_json(indent=2))
        except (FileNotFoundError, OSError, IOError) as e:
            logging.getLogger("Config").error("Error saving settings: %s", e)
            raise

