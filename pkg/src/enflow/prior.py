"""
Harmonic prior over conformations.

Each coordinate axis is drawn independently from a Gaussian whose precision
is the graph Laplacian of the molecule. The translation mode (eigenvalue 0)
is left out, so every sample is centered at the origin.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from enflow.errors import DisconnectedGraph
from enflow.models import Conformation, MolGraph

NULL_TOL_RELATIVE: float = 1e-8


@dataclass(frozen=True)
class HarmonicPrior:
    """Eigendecomposition of a molecule's Laplacian, ready for sampling"""

    graph: MolGraph
    eigvals: NDArray[np.float64]
    eigvecs: NDArray[np.float64]
    null_tol: float

    @classmethod
    def build(cls, graph: MolGraph) -> "HarmonicPrior":
        """
        Decompose the Laplacian of a connected graph.

        Raises:
            DisconnectedGraph: the graph has more than one component
        """
        lap = graph.laplacian()
        eigvals, eigvecs = np.linalg.eigh(lap)
        # round-off can push the null eigenvalue slightly below zero
        eigvals = np.clip(eigvals, 0.0, None)
        null_tol = NULL_TOL_RELATIVE * max(float(eigvals[-1]), 1.0)

        n_null = int(np.sum(eigvals < null_tol))
        if n_null != 1:
            raise DisconnectedGraph(
                f"Expected one null mode for '{graph.mol_id}', found {n_null}"
            )
        logging.getLogger("Prior").debug(
            "Built prior for %s: %d atoms, spectrum [%g, %g]",
            graph.mol_id or "<anonymous>",
            graph.n_atoms,
            eigvals[0],
            eigvals[-1],
        )
        eigvals.flags.writeable = False
        eigvecs.flags.writeable = False
        return cls(graph=graph, eigvals=eigvals, eigvecs=eigvecs, null_tol=null_tol)

    @property
    def n_atoms(self) -> int:
        """Number of atoms of the molecule"""
        return self.graph.n_atoms

    def _mode_scales(self) -> NDArray[np.float64]:
        active = self.eigvals > self.null_tol
        return np.where(active, 1.0 / np.sqrt(np.where(active, self.eigvals, 1.0)), 0.0)

    def sample_with(self, rng: np.random.Generator) -> Conformation:
        """Draw one conformation from an existing generator"""
        z = rng.standard_normal((self.n_atoms, 3))
        coords = self.eigvecs @ (self._mode_scales()[:, None] * z)
        return Conformation(coords)

    def sample(self, rng_seed: int) -> Conformation:
        """Draw one conformation, deterministic in the seed"""
        return self.sample_with(np.random.default_rng(rng_seed))

    def covariance(self) -> NDArray[np.float64]:
        """Per-axis covariance of the samples, the pseudo-inverse of the Laplacian"""
        scales = self._mode_scales()
        return (self.eigvecs * scales**2) @ self.eigvecs.T


def build(graph: MolGraph) -> HarmonicPrior:
    """Build the harmonic prior of a molecule"""
    return HarmonicPrior.build(graph)


def sample(prior: HarmonicPrior, rng_seed: int) -> Conformation:
    """Draw one prior conformation"""
    return prior.sample(rng_seed)
