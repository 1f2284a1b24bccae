"""
Synthetic toy molecules with a known energy function.

    E_true = sum_bonds k (d_ij - r0)^2
           + w_angle sum_angles (theta_ijk - theta0)^2
           + w_rep sum_{hops >= 3} max(0, r_rep - d_ij)^2

Conformers are drawn by Metropolis single-atom moves from exp(-E_true / kT),
with the step size tuned during burn-in towards a target acceptance rate.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict

from enflow.errors import ConfigError
from enflow.models import Conformation, ConformerEnsemble, MolGraph
from enflow.prior import HarmonicPrior

Array = NDArray[np.float64]


class Topology(str, Enum):
    """Bond pattern of generated molecules"""

    CHAIN = "chain"
    RING = "ring"
    RANDOM_TREE = "random-tree"
    MIXED = "mixed"


class SyntheticSpec(BaseModel):
    """Shape of the synthetic dataset and its force field"""

    model_config = ConfigDict(frozen=True)

    n_molecules: int = 500
    min_atoms: int = 4
    max_atoms: int = 7
    topology: Topology = Topology.MIXED
    n_atom_types: int = 4
    bond_k: float = 10.0
    rest_length: float = 1.5
    angle_weight: float = 2.0
    angle_rest_deg: float = 110.0
    repulsion_weight: float = 1.0
    repulsion_radius: float = 2.0
    kt: float = 1.0
    n_conformers: int = 10
    burn_in_sweeps: int = 200
    thin_sweeps: int = 20
    step_size: float = 0.2
    target_acceptance: float = 0.4

    def check(self) -> None:
        """Raise ConfigError when a field is out of range"""
        if self.n_molecules < 1:
            raise ConfigError(f"n_molecules must be at least 1, got {self.n_molecules}")
        if not 1 <= self.min_atoms <= self.max_atoms:
            raise ConfigError(
                f"Atom range [{self.min_atoms}, {self.max_atoms}] is empty or starts below 1"
            )
        if self.topology == Topology.RING and self.min_atoms < 3:
            raise ConfigError("Rings need at least 3 atoms")
        if self.n_atom_types < 1:
            raise ConfigError("n_atom_types must be at least 1")
        if not self.bond_k > 0 or not self.rest_length > 0:
            raise ConfigError("bond_k and rest_length must be positive")
        if self.angle_weight < 0 or self.repulsion_weight < 0 or self.repulsion_radius < 0:
            raise ConfigError("Angle and repulsion terms must be non-negative")
        if not self.kt > 0:
            raise ConfigError(f"kt must be positive, got {self.kt}")
        if self.n_conformers < 1:
            raise ConfigError(f"n_conformers must be at least 1, got {self.n_conformers}")
        if self.burn_in_sweeps < 0 or self.thin_sweeps < 1:
            raise ConfigError("burn_in_sweeps must be non-negative and thin_sweeps positive")
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be positive, got {self.step_size}")
        if not 0 < self.target_acceptance < 1:
            raise ConfigError("target_acceptance must lie in (0, 1)")


@dataclass(frozen=True)
class ForceField:
    """Precomputed interaction lists of one molecule"""

    bonds: NDArray[np.int64]
    angles: NDArray[np.int64]
    far_pairs: NDArray[np.int64]
    spec: SyntheticSpec

    @classmethod
    def for_graph(cls, graph: MolGraph, spec: SyntheticSpec) -> "ForceField":
        """Bonds, angle triples (i, center, k) and pairs three or more bonds apart"""
        neighbors = graph.neighbors()
        angles = [
            (a, center, b)
            for center, nbrs in enumerate(neighbors)
            for x, a in enumerate(nbrs)
            for b in nbrs[x + 1 :]
        ]
        hops = graph.hop_distances()
        far = [
            (i, j)
            for i in range(graph.n_atoms)
            for j in range(i + 1, graph.n_atoms)
            if hops[i, j] >= 3
        ]
        return cls(
            bonds=np.asarray(graph.bonds, dtype=np.int64).reshape(-1, 2),
            angles=np.asarray(angles, dtype=np.int64).reshape(-1, 3),
            far_pairs=np.asarray(far, dtype=np.int64).reshape(-1, 2),
            spec=spec,
        )

    def energy(self, coords: Array) -> float:
        """E_true of one conformation"""
        spec = self.spec
        total = 0.0
        if self.bonds.size:
            d = np.linalg.norm(coords[self.bonds[:, 0]] - coords[self.bonds[:, 1]], axis=1)
            total += spec.bond_k * float(np.sum((d - spec.rest_length) ** 2))
        if self.angles.size and spec.angle_weight > 0:
            u = coords[self.angles[:, 0]] - coords[self.angles[:, 1]]
            v = coords[self.angles[:, 2]] - coords[self.angles[:, 1]]
            norms = np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            cosine = np.clip(np.sum(u * v, axis=1) / np.maximum(norms, 1e-12), -1.0, 1.0)
            theta = np.arccos(cosine)
            total += spec.angle_weight * float(
                np.sum((theta - math.radians(spec.angle_rest_deg)) ** 2)
            )
        if self.far_pairs.size and spec.repulsion_weight > 0:
            d = np.linalg.norm(
                coords[self.far_pairs[:, 0]] - coords[self.far_pairs[:, 1]], axis=1
            )
            total += spec.repulsion_weight * float(
                np.sum(np.maximum(0.0, spec.repulsion_radius - d) ** 2)
            )
        return total


def true_energy(graph: MolGraph, c: Conformation, spec: SyntheticSpec) -> float:
    """E_true of a conformation under the synthetic force field"""
    return ForceField.for_graph(graph, spec).energy(c.coords)


def make_graph(n_atoms: int, topology: Topology, n_atom_types: int, rng: np.random.Generator, mol_id: str) -> MolGraph:
    """Random atom types on a chain, ring or random tree"""
    if topology == Topology.MIXED:
        choices = [Topology.CHAIN, Topology.RANDOM_TREE]
        if n_atoms >= 3:
            choices.append(Topology.RING)
        topology = choices[int(rng.integers(len(choices)))]
    bonds: list[tuple[int, int]]
    if topology == Topology.RANDOM_TREE:
        bonds = [(int(rng.integers(i)), i) for i in range(1, n_atoms)]
    else:
        bonds = [(i, i + 1) for i in range(n_atoms - 1)]
        if topology == Topology.RING and n_atoms >= 3:
            bonds.append((0, n_atoms - 1))
    types = tuple(int(a) for a in rng.integers(n_atom_types, size=n_atoms))
    return MolGraph(atom_types=types, bonds=tuple(bonds), mol_id=mol_id)


@dataclass(frozen=True)
class MetropolisResult:
    """Recorded conformers with their energies and the production acceptance rate"""

    conformers: list[Conformation]
    energies: list[float]
    acceptance: float
    step_size: float


def metropolis_sample(
    graph: MolGraph, spec: SyntheticSpec, rng: np.random.Generator
) -> MetropolisResult:
    """
    Single-atom Metropolis chain.

    A sweep is n_atoms proposed moves. The step size is rescaled after every
    burn-in sweep towards the target acceptance and frozen afterwards; one
    conformer is recorded every thin_sweeps production sweeps.
    """
    field = ForceField.for_graph(graph, spec)
    n = graph.n_atoms
    coords = HarmonicPrior.build(graph).sample_with(rng).coords * spec.rest_length
    current = field.energy(coords)
    step = spec.step_size

    def sweep() -> int:
        nonlocal coords, current
        accepted = 0
        for _ in range(n):
            atom = int(rng.integers(n))
            trial = coords.copy()
            trial[atom] += rng.uniform(-step, step, size=3)
            trial_energy = field.energy(trial)
            delta = trial_energy - current
            if delta <= 0 or rng.random() < math.exp(-delta / spec.kt):
                coords, current = trial, trial_energy
                accepted += 1
        return accepted

    for _ in range(spec.burn_in_sweeps):
        rate = sweep() / n
        step *= 1.1 if rate > spec.target_acceptance else 0.9

    conformers: list[Conformation] = []
    energies: list[float] = []
    accepted = 0
    proposed = 0
    for _ in range(spec.n_conformers):
        for _ in range(spec.thin_sweeps):
            accepted += sweep()
            proposed += n
        conformers.append(Conformation(coords).center())
        energies.append(current)
    return MetropolisResult(
        conformers=conformers,
        energies=energies,
        acceptance=accepted / proposed,
        step_size=step,
    )


def gen_synthetic(spec: SyntheticSpec, seed: int) -> list[ConformerEnsemble]:
    """
    Generate the synthetic dataset; every conformer carries its E_true.

    Raises:
        ConfigError: invalid spec
    """
    logger = logging.getLogger("Synthetic")
    spec.check()
    ensembles: list[ConformerEnsemble] = []
    rates: list[float] = []
    for index in range(spec.n_molecules):
        rng = np.random.default_rng([seed, index])
        n_atoms = int(rng.integers(spec.min_atoms, spec.max_atoms + 1))
        graph = make_graph(n_atoms, spec.topology, spec.n_atom_types, rng, f"mol-{index:04d}")
        result = metropolis_sample(graph, spec, rng)
        rates.append(result.acceptance)
        ensembles.append(
            ConformerEnsemble(graph=graph, conformers=result.conformers, energies=result.energies)
        )
        logger.debug(
            "%s: %d atoms, acceptance %.3f, step %.3f",
            graph.mol_id,
            n_atoms,
            result.acceptance,
            result.step_size,
        )
    logger.info(
        "Generated %d molecules, mean acceptance %.3f", len(ensembles), sum(rates) / len(rates)
    )
    return ensembles
