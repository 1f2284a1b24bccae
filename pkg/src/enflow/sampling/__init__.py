"""Energy-guided ODE sampling and ground-state certification"""

__all__ = [
    "CertMode",
    "GuidanceSchedule",
    "SamplerConfig",
    "certify_ground_state",
    "default_schedule",
    "guided_field",
    "sample_ensemble",
    "sample_many",
    "sample_ode",
    "select_lowest_energy",
    "x1_hat",
]

from .certify import certify_ground_state, select_lowest_energy
from .config import CertMode, SamplerConfig
from .sampler import guided_field, sample_ensemble, sample_many, sample_ode, x1_hat
from .schedule import GuidanceSchedule, default_schedule
