"""Distance-matrix errors and aligned RMSD of ground-state predictions"""

import csv
import io
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from enflow.errors import EmptyDataset, MissingLabels, ShapeError
from enflow.metrics.rmsd import kabsch_rmsd
from enflow.models import Conformation, ConformerEnsemble
from enflow.utils.move import atomic_write_text


def _distance_delta(cs: Conformation, ch: Conformation) -> NDArray[np.float64]:
    if cs.n_atoms != ch.n_atoms:
        raise ShapeError(f"Comparing {cs.n_atoms} atoms with {ch.n_atoms} atoms")
    return cs.distance_matrix() - ch.distance_matrix()


def d_mae(cs: Conformation, ch: Conformation) -> float:
    """Mean absolute error over all n^2 entries of the distance matrices"""
    delta = _distance_delta(cs, ch)
    return float(np.sum(np.abs(delta)) / delta.size)


def d_rmse(cs: Conformation, ch: Conformation) -> float:
    """Root mean square error over all n^2 entries of the distance matrices"""
    delta = _distance_delta(cs, ch)
    return math.sqrt(float(np.sum(delta * delta)) / delta.size)


@dataclass(frozen=True)
class GroundStateRow:
    """Errors of one molecule's prediction"""

    mol_id: str
    d_mae: float
    d_rmse: float
    c_rmsd: float


@dataclass(frozen=True)
class GroundStateReport:
    """Mean errors over molecules"""

    d_mae: float
    d_rmse: float
    c_rmsd: float
    per_molecule: list[GroundStateRow] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) and v >= 0 for v in (self.d_mae, self.d_rmse, self.c_rmsd)):
            raise ValueError("Ground-state errors must be finite and non-negative")

    def to_csv(self) -> str:
        """One row per molecule, then the mean row"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("mol_id", "d_mae", "d_rmse", "c_rmsd"))
        for r in self.per_molecule:
            writer.writerow((r.mol_id, repr(r.d_mae), repr(r.d_rmse), repr(r.c_rmsd)))
        writer.writerow(("mean", repr(self.d_mae), repr(self.d_rmse), repr(self.c_rmsd)))
        return buffer.getvalue()

    def save(self, path: Path) -> None:
        """Write the CSV form"""
        atomic_write_text(self.to_csv(), path)


def ground_state_row(mol_id: str, truth: Conformation, predicted: Conformation) -> GroundStateRow:
    """All three errors for one molecule"""
    return GroundStateRow(
        mol_id=mol_id,
        d_mae=d_mae(truth, predicted),
        d_rmse=d_rmse(truth, predicted),
        c_rmsd=kabsch_rmsd(truth, predicted),
    )


def evaluate_ground_states(
    dataset: Sequence[ConformerEnsemble], predictions: Mapping[str, Conformation]
) -> GroundStateReport:
    """Compare predictions with each molecule's highest-weight conformer"""
    rows: list[GroundStateRow] = []
    for ens in dataset:
        predicted = predictions.get(ens.mol_id)
        if predicted is None:
            raise MissingLabels(f"No ground-state prediction for '{ens.mol_id}'")
        rows.append(ground_state_row(ens.mol_id, ens.ground_state(), predicted))
    if not rows:
        raise EmptyDataset("Nothing to evaluate")
    n = len(rows)
    return GroundStateReport(
        d_mae=sum(r.d_mae for r in rows) / n,
        d_rmse=sum(r.d_rmse for r in rows) / n,
        c_rmsd=sum(r.c_rmsd for r in rows) / n,
        per_molecule=rows,
    )
