"""Training hyper-parameters"""

from enum import Enum

from pydantic import BaseModel, ConfigDict

from enflow.errors import ConfigError


class OptimizerKind(str, Enum):
    """Parameter update rule"""

    SGD = "sgd"
    ADAM = "adam"


class TrainConfig(BaseModel):
    """Joint training, energy fine-tuning and reflow settings"""

    model_config = ConfigDict(frozen=True)

    sigma: float = 0.1
    eta_energy: float = 10.0
    t_min: float = 1e-3
    lr_theta: float = 5e-3
    lr_phi: float = 5e-3
    batch_size: int = 8
    steps_matching: int = 200
    steps_finetune: int = 200
    seed: int = 0
    optimizer: OptimizerKind = OptimizerKind.ADAM
    clip_norm: float = 10.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    reflow_steps: int = 0
    reflow_ode_steps: int = 50
    reflow_pairs_per_molecule: int = 4
    reflow_lr: float = 2e-3

    log_every: int = 20

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if not 0.0 < self.t_min < 0.5:
            raise ConfigError(f"t_min must lie in (0, 0.5), got {self.t_min}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if self.eta_energy < 0:
            raise ConfigError(f"eta_energy must be non-negative, got {self.eta_energy}")
        if min(self.lr_theta, self.lr_phi, self.reflow_lr) < 0:
            raise ConfigError("Learning rates must be non-negative")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if min(self.steps_matching, self.steps_finetune, self.reflow_steps) < 0:
            raise ConfigError("Step counts must be non-negative")
        if self.reflow_ode_steps < 1:
            raise ConfigError(f"reflow_ode_steps must be at least 1, got {self.reflow_ode_steps}")
        if self.reflow_pairs_per_molecule < 1:
            raise ConfigError("reflow_pairs_per_molecule must be at least 1")
        if not self.clip_norm > 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.log_every < 1:
            raise ConfigError(f"log_every must be at least 1, got {self.log_every}")
