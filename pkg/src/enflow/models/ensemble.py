"""
Represents a conformer ensemble of one molecule, with optional energy labels
and Boltzmann weights
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import Any, cast, override

import numpy as np
from numpy.typing import NDArray

from enflow.errors import EmptyEnsemble, InvalidWeights, MissingLabels, ShapeError
from enflow.models.conformation import Conformation
from enflow.models.keys import SerializationKeys
from enflow.models.mol_graph import MolGraph

DEFAULT_TEMPERATURE: float = 298.15
# Synthetic energy units: k_B is chosen so that k_B * 298.15 K == 1.0
BOLTZMANN_CONSTANT: float = 1.0 / DEFAULT_TEMPERATURE
WEIGHT_SUM_TOL: float = 1e-9


def boltzmann_weights(
    energies: Sequence[float],
    temperature: float = DEFAULT_TEMPERATURE,
    degeneracies: Sequence[float] | None = None,
    k_b: float = BOLTZMANN_CONSTANT,
) -> list[float]:
    """
    Boltzmann weights w_i = d_i exp(-(E_i - min E) / k_B T) / Z.

    Args:
        energies: Conformer energies, in the same units as k_b * temperature
        temperature: Temperature, must be positive
        degeneracies: Optional per-conformer degeneracy factors, default all 1
        k_b: Boltzmann constant in energy units per kelvin

    Returns:
        Weights summing to one
    """
    if len(energies) == 0:
        raise EmptyEnsemble("Cannot weight an empty ensemble")
    if temperature <= 0 or k_b <= 0:
        raise ValueError(f"Temperature and k_B must be positive, got {temperature}, {k_b}")

    e = np.asarray(energies, dtype=np.float64)
    d = (
        np.ones_like(e)
        if degeneracies is None
        else np.asarray(degeneracies, dtype=np.float64)
    )
    if d.shape != e.shape:
        raise ShapeError(f"{d.size} degeneracies for {e.size} energies")
    if np.any(d <= 0):
        raise InvalidWeights("Degeneracies must be positive")

    # relative energies keep the largest exponent at zero
    unnormalized = d * np.exp(-(e - e.min()) / (k_b * temperature))
    return [float(w) for w in unnormalized / unnormalized.sum()]


@dataclass(frozen=True)
class EnergyLabelNormalizer:
    """Per-molecule min-shift and range-scale of energy labels"""

    shift: float
    scale: float

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"Normalizer scale must be positive, got {self.scale}")

    @classmethod
    def from_energies(cls, energies: Sequence[float]) -> "EnergyLabelNormalizer":
        """Shift by the minimum, scale by the range (1.0 for a flat ensemble)"""
        if len(energies) == 0:
            raise EmptyEnsemble("Cannot normalize an empty list of energies")
        low = float(min(energies))
        spread = float(max(energies)) - low
        return cls(shift=low, scale=spread if spread > 0 else 1.0)

    def normalize(self, energies: Sequence[float]) -> NDArray[np.float64]:
        """Map raw energies to labels with minimum 0"""
        return (np.asarray(energies, dtype=np.float64) - self.shift) / self.scale

    def denormalize(self, labels: Sequence[float]) -> NDArray[np.float64]:
        """Inverse of normalize"""
        return np.asarray(labels, dtype=np.float64) * self.scale + self.shift


@dataclass
class ConformerEnsemble:
    """Conformers of one molecule, with optional energies and weights"""

    graph: MolGraph
    conformers: list[Conformation] = field(default_factory=list)
    energies: list[float] | None = None
    weights: list[float] | None = None

    def __post_init__(self) -> None:
        for conf in self.conformers:
            if conf.n_atoms != self.graph.n_atoms:
                raise ShapeError(
                    f"Conformer with {conf.n_atoms} atoms for a {self.graph.n_atoms}-atom graph"
                )
        if self.energies is not None and len(self.energies) != len(self.conformers):
            raise ShapeError(
                f"{len(self.energies)} energies for {len(self.conformers)} conformers"
            )
        if self.weights is not None:
            if len(self.weights) != len(self.conformers):
                raise ShapeError(
                    f"{len(self.weights)} weights for {len(self.conformers)} conformers"
                )
            if any(w < 0 or w > 1 for w in self.weights):
                raise InvalidWeights("Weights must lie in [0, 1]")
            if abs(math.fsum(self.weights) - 1.0) > WEIGHT_SUM_TOL:
                raise InvalidWeights(
                    f"Weights sum to {math.fsum(self.weights)}, expected 1"
                )

    @property
    def mol_id(self) -> str:
        """Identifier of the molecule"""
        return self.graph.mol_id

    def __len__(self) -> int:
        return len(self.conformers)

    def centered(self) -> "ConformerEnsemble":
        """Copy with every conformer moved to the origin"""
        return replace(self, conformers=[c.center() for c in self.conformers])

    def with_boltzmann_weights(
        self,
        temperature: float = DEFAULT_TEMPERATURE,
        degeneracies: Sequence[float] | None = None,
    ) -> "ConformerEnsemble":
        """Copy with weights derived from the energies"""
        if self.energies is None:
            raise MissingLabels(f"Molecule '{self.mol_id}' has no energies to weight")
        return replace(
            self,
            weights=boltzmann_weights(self.energies, temperature, degeneracies),
        )

    def ground_state_label(self, temperature: float = DEFAULT_TEMPERATURE) -> int:
        """Index of the conformer with the highest Boltzmann weight, ties to the lowest index"""
        weights = self.weights
        if weights is None:
            if self.energies is None:
                raise MissingLabels(
                    f"Molecule '{self.mol_id}' has neither weights nor energies"
                )
            weights = boltzmann_weights(self.energies, temperature)
        if len(weights) == 0:
            raise EmptyEnsemble(f"Molecule '{self.mol_id}' has no conformers")
        # np.argmax returns the first maximum
        return int(np.argmax(np.asarray(weights)))

    def ground_state(self, temperature: float = DEFAULT_TEMPERATURE) -> Conformation:
        """The conformer selected by ground_state_label"""
        return self.conformers[self.ground_state_label(temperature)]

    def top_k(self, k: int, temperature: float = DEFAULT_TEMPERATURE) -> "ConformerEnsemble":
        """Keep the k highest-weight conformers, in their original order"""
        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")
        if len(self.conformers) <= k:
            return self
        ranked = self if self.weights is not None else self.with_boltzmann_weights(temperature)
        weights = np.asarray(cast(list[float], ranked.weights))
        keep = sorted(np.argsort(-weights, kind="stable")[:k].tolist())
        kept_weights = weights[keep]
        return ConformerEnsemble(
            graph=self.graph,
            conformers=[self.conformers[i] for i in keep],
            energies=None if self.energies is None else [self.energies[i] for i in keep],
            weights=[float(w) for w in kept_weights / kept_weights.sum()],
        )

    def normalizer(self) -> EnergyLabelNormalizer:
        """Per-molecule label normalizer built from the energies"""
        if self.energies is None:
            raise MissingLabels(f"Molecule '{self.mol_id}' has no energy labels")
        return EnergyLabelNormalizer.from_energies(self.energies)

    @override
    def __str__(self) -> str:
        return f"ConformerEnsemble(id={self.mol_id}; conformers={len(self.conformers)})"

    def to_dict(self) -> dict[str, Any]:
        """Serialize to one JSON-lines record"""
        conformers: list[dict[str, Any]] = []
        for i, conf in enumerate(self.conformers):
            entry = conf.to_dict()
            if self.energies is not None:
                entry[SerializationKeys.ENERGY.value] = float(self.energies[i])
            conformers.append(entry)
        record = self.graph.to_dict()
        record[SerializationKeys.CONFORMERS.value] = conformers
        return record

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ConformerEnsemble":
        """Build the ensemble from one JSON-lines record, centering every conformer"""
        graph = MolGraph.from_dict(data)
        entries = cast(list[dict[str, Any]], data.get(SerializationKeys.CONFORMERS.value, []))
        conformers = [
            Conformation.from_array(entry[SerializationKeys.COORDS.value]).center()
            for entry in entries
        ]
        energies: list[float] | None = None
        if entries and all(SerializationKeys.ENERGY.value in e for e in entries):
            energies = [float(e[SerializationKeys.ENERGY.value]) for e in entries]
        return cls(graph=graph, conformers=conformers, energies=energies)


def ground_state_label(
    ensemble: ConformerEnsemble, temperature: float = DEFAULT_TEMPERATURE
) -> int:
    """Index of the ground-state conformer of an ensemble"""
    return ensemble.ground_state_label(temperature)
