"""
Two-phase joint training.

Matching phase: theta follows the flow matching loss and phi the energy
matching loss on the same path samples. Fine-tuning phase: theta is frozen
and phi follows L_EM + eta_energy * L_energy on normalized labels.
Every step records all three losses; the ones a phase does not optimize
are evaluated on the same batch and left out of the update.
"""

import csv
import io
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from enflow.errors import EmptyDataset, MissingLabels
from enflow.models import ConformerEnsemble, EnergyLabelNormalizer
from enflow.nn.config import NetConfig
from enflow.nn.params import ModelParams
from enflow.prior import HarmonicPrior
from enflow.training.config import TrainConfig
from enflow.training.losses import loss_em, loss_energy_batch, loss_finetune, loss_sbcfm
from enflow.training.optim import make_optimizer
from enflow.training.paths import PathSample, make_path_sample
from enflow.utils.move import atomic_write_bytes

HISTORY_COLUMNS: tuple[str, ...] = ("step", "phase", "loss_sbcfm", "loss_em", "loss_energy")
PHASE_MATCHING = "matching"
PHASE_FINETUNE = "finetune"
PHASE_REFLOW = "reflow"


@dataclass(frozen=True)
class HistoryRow:
    """Losses of one optimization step; None where a loss is not evaluated"""

    step: int
    phase: str
    loss_sbcfm: float | None = None
    loss_em: float | None = None
    loss_energy: float | None = None

    def as_row(self) -> list[str]:
        """CSV cells, floats at full precision"""
        cells = [self.loss_sbcfm, self.loss_em, self.loss_energy]
        return [str(self.step), self.phase] + ["" if c is None else repr(c) for c in cells]


class TrainResult(NamedTuple):
    """Trained parameters and the per-step history"""

    theta: ModelParams
    phi: ModelParams
    history: list[HistoryRow]


def write_history_csv(history: Sequence[HistoryRow], path: Path) -> None:
    """Write the history with a header row"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for row in history:
        writer.writerow(row.as_row())
    atomic_write_bytes(buffer.getvalue().encode("utf-8"), path)


def build_priors(dataset: Sequence[ConformerEnsemble]) -> list[HarmonicPrior]:
    """One harmonic prior per molecule, in dataset order"""
    return [HarmonicPrior.build(ens.graph) for ens in dataset]


def draw_path_batch(
    dataset: Sequence[ConformerEnsemble],
    priors: Sequence[HarmonicPrior],
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> tuple[list[PathSample], list[int]]:
    """
    Independent coupling: a random molecule, one of its conformers as c1
    and a fresh prior sample as c0, at t ~ U(t_min, 1 - t_min).

    Returns:
        (path samples, molecule index of each sample)
    """
    samples: list[PathSample] = []
    picked: list[int] = []
    for _ in range(cfg.batch_size):
        index = int(rng.integers(len(dataset)))
        ensemble = dataset[index]
        c1 = ensemble.conformers[int(rng.integers(len(ensemble)))]
        c0 = priors[index].sample_with(rng)
        t = float(rng.uniform(cfg.t_min, 1.0 - cfg.t_min))
        samples.append(make_path_sample(ensemble.graph, c0, c1, t, cfg.sigma, rng))
        picked.append(index)
    return samples, picked


def _labelled_items(
    dataset: Sequence[ConformerEnsemble],
    normalizers: Sequence[EnergyLabelNormalizer | None],
    picked: Sequence[int],
) -> list[tuple[ConformerEnsemble, EnergyLabelNormalizer | None]]:
    return [(dataset[i], normalizers[i]) for i in picked if dataset[i].energies is not None]


def train_joint(
    dataset: Sequence[ConformerEnsemble],
    cfg: TrainConfig,
    theta_config: NetConfig | None = None,
    phi_config: NetConfig | None = None,
    theta: ModelParams | None = None,
    phi: ModelParams | None = None,
) -> TrainResult:
    """
    Train the vector field and the energy model.

    Args:
        dataset: Molecules with conformers; energies are needed for fine-tuning
        cfg: Training settings
        theta_config: Shape of a freshly initialized vector field network
        phi_config: Shape of a freshly initialized energy network
        theta: Starting vector field parameters, copied
        phi: Starting energy parameters, copied

    Returns:
        The trained parameters and one history row per step
    """
    logger = logging.getLogger("Trainer")
    cfg.check()
    dataset = [ens for ens in dataset if len(ens) > 0]
    if not dataset:
        raise EmptyDataset("Training needs at least one molecule with conformers")
    if cfg.steps_finetune > 0:
        unlabeled = [ens.mol_id for ens in dataset if ens.energies is None]
        if unlabeled:
            raise MissingLabels(f"Energy fine-tuning needs energies for {unlabeled[:5]}")

    theta = (
        theta.copy()
        if theta is not None
        else ModelParams.init(theta_config or NetConfig.vector_field(), cfg.seed)
    )
    phi = (
        phi.copy()
        if phi is not None
        else ModelParams.init(phi_config or NetConfig.energy_model(), cfg.seed + 1)
    )
    priors = build_priors(dataset)
    normalizers = [ens.normalizer() if ens.energies is not None else None for ens in dataset]
    rng = np.random.default_rng(cfg.seed)
    history: list[HistoryRow] = []

    logger.info(
        "Training on %d molecules: %d matching steps, %d fine-tuning steps",
        len(dataset),
        cfg.steps_matching,
        cfg.steps_finetune,
    )

    opt_theta = make_optimizer(cfg, cfg.lr_theta)
    opt_phi = make_optimizer(cfg, cfg.lr_phi)
    for step in range(cfg.steps_matching):
        batch, picked = draw_path_batch(dataset, priors, cfg, rng)
        flow = loss_sbcfm(theta, batch)
        matching = loss_em(phi, batch)
        # monitored only, phi is not fitted to the labels in this phase
        labelled = _labelled_items(dataset, normalizers, picked)
        energy_value = loss_energy_batch(phi, labelled).value if labelled else None
        opt_theta.step(theta, flow.grads)
        opt_phi.step(phi, matching.grads)
        row = HistoryRow(len(history) + 1, PHASE_MATCHING, flow.value, matching.value, energy_value)
        history.append(row)
        logger.debug("%s", row)
        if (step + 1) % cfg.log_every == 0 or step == 0:
            logger.info(
                "matching %d/%d: sbcfm=%.5g em=%.5g",
                step + 1,
                cfg.steps_matching,
                flow.value,
                matching.value,
            )

    opt_phi = make_optimizer(cfg, cfg.lr_phi)
    for step in range(cfg.steps_finetune):
        batch, picked = draw_path_batch(dataset, priors, cfg, rng)
        items = _labelled_items(dataset, normalizers, picked)
        combined, matching, regression = loss_finetune(phi, batch, items, cfg.eta_energy)
        flow_value = loss_sbcfm(theta, batch).value
        opt_phi.step(phi, combined.grads)
        row = HistoryRow(
            len(history) + 1, PHASE_FINETUNE, flow_value, matching.value, regression.value
        )
        history.append(row)
        logger.debug("%s", row)
        if (step + 1) % cfg.log_every == 0 or step == 0:
            logger.info(
                "finetune %d/%d: em=%.5g energy=%.5g",
                step + 1,
                cfg.steps_finetune,
                matching.value,
                regression.value,
            )

    return TrainResult(theta=theta, phi=phi, history=history)
