"""Ensemble and ground-state evaluation metrics"""

__all__ = [
    "GroundStateReport",
    "GroundStateRow",
    "MetricReport",
    "MoleculeMetrics",
    "amr",
    "coverage",
    "default_delta",
    "d_mae",
    "d_rmse",
    "evaluate_generation",
    "evaluate_ground_states",
    "kabsch_align",
    "kabsch_rmsd",
    "lower_median",
    "rmsd_matrix",
]

from .coverage import amr, coverage, default_delta
from .ground_state import (
    GroundStateReport,
    GroundStateRow,
    d_mae,
    d_rmse,
    evaluate_ground_states,
)
from .report import MetricReport, MoleculeMetrics, evaluate_generation, lower_median
from .rmsd import kabsch_align, kabsch_rmsd, rmsd_matrix
