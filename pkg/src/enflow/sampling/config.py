"""Sampler and certification settings"""

from enum import Enum

from pydantic import BaseModel, ConfigDict

from enflow.errors import ConfigError
from enflow.sampling.schedule import GuidanceSchedule, default_schedule


class CertMode(str, Enum):
    """Ground-state certification strategy"""

    JUSTFM = "justfm"
    ENSEMBLECERT = "ensemblecert"

    @classmethod
    def parse(cls, value: "str | CertMode") -> "CertMode":
        """Accept a mode or its name, case-insensitively"""
        if isinstance(value, CertMode):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as e:
            raise ConfigError(
                f"Unknown certification mode '{value}', expected one of {[m.value for m in cls]}"
            ) from e


# amplitude a of each certification mode
MODE_AMPLITUDES: dict[CertMode, float] = {
    CertMode.JUSTFM: 0.5,
    CertMode.ENSEMBLECERT: 0.2,
}


class SamplerConfig(BaseModel):
    """Euler sampling with optional energy guidance"""

    model_config = ConfigDict(frozen=True)

    n_steps: int = 5
    amplitude: float = 0.2
    guided: bool = True
    seed: int = 0

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.amplitude < 0:
            raise ConfigError(f"amplitude must be non-negative, got {self.amplitude}")

    @property
    def schedule(self) -> GuidanceSchedule:
        """lambda_t of this configuration"""
        return GuidanceSchedule(self.amplitude)

    @property
    def dt(self) -> float:
        """Euler step size 1/N"""
        return 1.0 / self.n_steps

    @classmethod
    def for_dataset(
        cls, dataset_tag: str, n_steps: int, guided: bool = True, seed: int = 0
    ) -> "SamplerConfig":
        """Configuration with the tabulated amplitude of the dataset"""
        return cls(
            n_steps=n_steps,
            amplitude=default_schedule(dataset_tag, n_steps).amplitude,
            guided=guided,
            seed=seed,
        )

    @classmethod
    def for_mode(
        cls, mode: "str | CertMode", n_steps: int, seed: int = 0
    ) -> "SamplerConfig":
        """Guided configuration with the default amplitude of a certification mode"""
        return cls(
            n_steps=n_steps, amplitude=MODE_AMPLITUDES[CertMode.parse(mode)], guided=True, seed=seed
        )

    def with_seed(self, seed: int) -> "SamplerConfig":
        """Copy with another seed"""
        return self.model_copy(update={"seed": seed})
