"""
Coverage and average minimum RMSD between a reference set and a generated set.

Recall takes the references as queries, precision swaps the two sets.
"""

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from enflow.errors import EmptyEnsemble
from enflow.metrics.rmsd import rmsd_matrix
from enflow.models import Conformation

Array = NDArray[np.float64]

# coverage threshold delta of each dataset tag
DEFAULT_DELTAS: dict[str, float] = {"qm9": 0.5, "drugs": 0.75}


def _row_minima(matrix: Array) -> Array:
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise EmptyEnsemble("Coverage needs two non-empty sets")
    return matrix.min(axis=1)


def coverage_from_matrix(matrix: Array, delta: float) -> float:
    """Percentage of rows whose closest column is strictly below delta"""
    minima = _row_minima(matrix)
    return float(np.count_nonzero(minima < delta)) / minima.size * 100.0


def amr_from_matrix(matrix: Array) -> float:
    """Mean over rows of the closest column distance"""
    return float(np.mean(_row_minima(matrix)))


def coverage(
    refs: Sequence[Conformation], gens: Sequence[Conformation], delta: float
) -> float:
    """COV: share of refs with a generated conformer closer than delta, in percent"""
    return coverage_from_matrix(rmsd_matrix(refs, gens), delta)


def amr(refs: Sequence[Conformation], gens: Sequence[Conformation]) -> float:
    """AMR: mean over refs of the RMSD to the closest generated conformer"""
    return amr_from_matrix(rmsd_matrix(refs, gens))


def default_delta(dataset_tag: str) -> float:
    """Coverage threshold of a dataset tag; unknown tags use the drugs value"""
    return DEFAULT_DELTAS.get(dataset_tag.lower(), DEFAULT_DELTAS["drugs"])
