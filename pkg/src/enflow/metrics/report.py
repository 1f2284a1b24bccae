"""Per-molecule ensemble metrics aggregated into a report"""

import csv
import io
import json
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from enflow.errors import EmptyDataset, InsufficientSamples
from enflow.metrics.coverage import amr_from_matrix, coverage_from_matrix
from enflow.metrics.rmsd import rmsd_matrix
from enflow.models import Conformation, ConformerEnsemble
from enflow.utils.move import atomic_write_text

METRIC_COLUMNS: tuple[str, ...] = ("cov_r", "amr_r", "cov_p", "amr_p")


def lower_median(values: Sequence[float]) -> float:
    """Median; the lower of the two middle values for even counts"""
    if not values:
        raise EmptyDataset("Median of an empty list")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


@dataclass(frozen=True)
class MoleculeMetrics:
    """Recall and precision metrics of one molecule"""

    mol_id: str
    n_ref: int
    n_gen: int
    cov_r: float
    amr_r: float
    cov_p: float
    amr_p: float


@dataclass(frozen=True)
class MetricReport:
    """Means and medians across molecules, plus the per-molecule rows"""

    delta: float
    cov_r: float
    amr_r: float
    cov_p: float
    amr_p: float
    median_cov_r: float
    median_amr_r: float
    median_cov_p: float
    median_amr_p: float
    per_molecule: list[MoleculeMetrics] = field(default_factory=list)

    @classmethod
    def from_molecules(cls, rows: Sequence[MoleculeMetrics], delta: float) -> "MetricReport":
        """Aggregate per-molecule rows"""
        if not rows:
            raise EmptyDataset("No molecules to aggregate")
        columns = {name: [float(getattr(r, name)) for r in rows] for name in METRIC_COLUMNS}
        return cls(
            delta=delta,
            cov_r=sum(columns["cov_r"]) / len(rows),
            amr_r=sum(columns["amr_r"]) / len(rows),
            cov_p=sum(columns["cov_p"]) / len(rows),
            amr_p=sum(columns["amr_p"]) / len(rows),
            median_cov_r=lower_median(columns["cov_r"]),
            median_amr_r=lower_median(columns["amr_r"]),
            median_cov_p=lower_median(columns["cov_p"]),
            median_amr_p=lower_median(columns["amr_p"]),
            per_molecule=list(rows),
        )

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready structure"""
        return {
            "delta": self.delta,
            "mean": {name: getattr(self, name) for name in METRIC_COLUMNS},
            "median": {name: getattr(self, f"median_{name}") for name in METRIC_COLUMNS},
            "per_molecule": [asdict(r) for r in self.per_molecule],
        }

    def to_csv(self) -> str:
        """One row per molecule, then the mean and median rows"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(("mol_id", "n_ref", "n_gen", *METRIC_COLUMNS, "delta"))
        for r in self.per_molecule:
            writer.writerow(
                (r.mol_id, r.n_ref, r.n_gen, *(repr(float(getattr(r, c))) for c in METRIC_COLUMNS), repr(self.delta))
            )
        writer.writerow(("mean", "", "", *(repr(getattr(self, c)) for c in METRIC_COLUMNS), repr(self.delta)))
        writer.writerow(
            ("median", "", "", *(repr(getattr(self, f"median_{c}")) for c in METRIC_COLUMNS), repr(self.delta))
        )
        return buffer.getvalue()

    def save(self, csv_path: Path, json_path: Path) -> None:
        """Write the CSV and JSON forms"""
        atomic_write_text(self.to_csv(), csv_path)
        atomic_write_text(json.dumps(self.to_dict(), indent=2) + "\n", json_path)


def molecule_metrics(
    mol_id: str, refs: Sequence[Conformation], gens: Sequence[Conformation], delta: float
) -> MoleculeMetrics:
    """COV and AMR of one molecule under both protocols"""
    matrix = rmsd_matrix(refs, gens)
    return MoleculeMetrics(
        mol_id=mol_id,
        n_ref=len(refs),
        n_gen=len(gens),
        cov_r=coverage_from_matrix(matrix, delta),
        amr_r=amr_from_matrix(matrix),
        cov_p=coverage_from_matrix(matrix.T, delta),
        amr_p=amr_from_matrix(matrix.T),
    )


def evaluate_generation(
    dataset: Sequence[ConformerEnsemble],
    generated: Sequence[ConformerEnsemble],
    delta: float,
    workers: int = 1,
) -> MetricReport:
    """
    Compare 2K generated conformers against the K references of each molecule.

    Generated ensembles are matched to references by mol_id; the first 2K
    generated conformers are used. References without conformers are skipped
    with a warning.

    Raises:
        EmptyDataset: no reference has conformers
        InsufficientSamples: a molecule has fewer than 2K generated conformers
    """
    logger = logging.getLogger("Metrics")
    by_id = {ens.mol_id: ens for ens in generated}
    jobs: list[tuple[str, list[Conformation], list[Conformation]]] = []
    for ref in dataset:
        k = len(ref)
        if k == 0:
            logger.warning("Skipping molecule '%s': it has no reference conformers", ref.mol_id)
            continue
        gen = by_id.get(ref.mol_id)
        n_gen = 0 if gen is None else len(gen)
        if gen is None or n_gen < 2 * k:
            raise InsufficientSamples(
                f"Molecule '{ref.mol_id}' has {n_gen} generated conformers, needs {2 * k}"
            )
        jobs.append((ref.mol_id, list(ref.conformers), list(gen.conformers[: 2 * k])))

    def run(job: tuple[str, list[Conformation], list[Conformation]]) -> MoleculeMetrics:
        return molecule_metrics(job[0], job[1], job[2], delta)

    if not jobs:
        raise EmptyDataset("Nothing to evaluate")

    if workers <= 1:
        rows = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, jobs))
    report = MetricReport.from_molecules(rows, delta)
    logger.info(
        "delta=%g COV-R=%.2f AMR-R=%.4f COV-P=%.2f AMR-P=%.4f over %d molecules",
        delta,
        report.cov_r,
        report.amr_r,
        report.cov_p,
        report.amr_p,
        len(rows),
    )
    return report
