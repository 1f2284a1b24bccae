"""The molecular data model shared by every enflow component"""

__all__ = [
    "MolGraph",
    "Conformation",
    "ConformerEnsemble",
    "EnergyLabelNormalizer",
    "SerializationKeys",
    "boltzmann_weights",
    "center",
    "ground_state_label",
    "laplacian",
]

from .conformation import Conformation, center
from .ensemble import (
    ConformerEnsemble,
    EnergyLabelNormalizer,
    boltzmann_weights,
    ground_state_label,
)
from .keys import SerializationKeys
from .mol_graph import MolGraph, laplacian
