"""Featurization and the equivariant message passing networks"""

__all__ = [
    "FeaturizerConfig",
    "GraphBatch",
    "ModelParams",
    "NetConfig",
    "NetKind",
    "NetOutput",
    "cutoff",
    "energies",
    "energy",
    "energy_grad",
    "energy_grads",
    "forward",
    "rbf",
    "vector_field",
    "vector_field_batch",
]

from .config import FeaturizerConfig, NetConfig, NetKind
from .featurize import cutoff, rbf
from .graph_batch import GraphBatch
from .network import (
    NetOutput,
    energies,
    energy,
    energy_grad,
    energy_grads,
    forward,
    vector_field,
    vector_field_batch,
)
from .params import ModelParams
