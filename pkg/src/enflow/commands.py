"""
Pipeline steps behind the command line: dataset generation, training,
sampling, certification, evaluation and the sampling ablation.

Every step reads its inputs from and writes its outputs to Settings.OUT_DIR
unless explicit paths are given. Outputs depend only on the settings and the
seed.
"""

import csv
import io
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import NDArray

from enflow.config import Settings
from enflow.errors import EmptyDataset
from enflow.metrics.coverage import amr_from_matrix, coverage_from_matrix
from enflow.metrics.ground_state import GroundStateReport, evaluate_ground_states
from enflow.metrics.report import MetricReport, evaluate_generation
from enflow.metrics.rmsd import rmsd_matrix
from enflow.models import ConformerEnsemble, SerializationKeys
from enflow.models.dao.checkpoint_dao import Checkpoint, CheckpointDAO
from enflow.models.dao.dataset_dao import DatasetDAO, Prediction
from enflow.nn.network import energies, energy
from enflow.nn.params import ModelParams
from enflow.sampling.certify import certify_ground_state
from enflow.sampling.config import SamplerConfig
from enflow.sampling.sampler import sample_many
from enflow.synthetic import gen_synthetic
from enflow.training.reflow import reflow_finetune
from enflow.training.trainer import build_priors, train_joint, write_history_csv
from enflow.utils.move import atomic_write_text

ABLATION_COLUMNS: tuple[str, ...] = (
    "study",
    "n_steps",
    "amplitude",
    "ensemble_size",
    "metric",
    "value",
    "delta",
)
STUDY_GRID: str = "steps_amplitude"
STUDY_ENSEMBLE: str = "ensemble_size"
STUDY_REFLOW: str = "reflow"
RUN_CONFIG_FILE: str = "run_config.json"


class TrainOutputs(NamedTuple):
    """Files written by run_train"""

    checkpoint: Path
    history: Path


class CertifyOutputs(NamedTuple):
    """Files written by run_certify"""

    predictions: Path
    report: Path


class EvalOutputs(NamedTuple):
    """Files written by run_eval"""

    csv: Path
    json: Path


def _path(settings: Settings, explicit: Path | None, default_name: str) -> Path:
    return explicit if explicit is not None else settings.out_path(default_name)


def _record_settings(settings: Settings) -> None:
    settings.save_to_file(settings.out_path(RUN_CONFIG_FILE))


def _load_dataset(settings: Settings, dataset_path: Path | None) -> list[ConformerEnsemble]:
    path = _path(settings, dataset_path, settings.DATASET_FILE)
    return DatasetDAO.load(path, settings.DATA.max_conformers)


def _evaluation_molecules(
    settings: Settings, dataset: Sequence[ConformerEnsemble]
) -> list[ConformerEnsemble]:
    """Test split without empty ensembles; the whole dataset when the split leaves it empty"""
    logger = logging.getLogger("Commands")
    test = DatasetDAO.split(dataset, settings.DATA.split).test
    if not test:
        logger.warning("The test split is empty, evaluating on all %d molecules", len(dataset))
        test = list(dataset)
    empty = [ens.mol_id for ens in test if len(ens) == 0]
    if empty:
        logger.warning("Skipping %d molecules without conformers: %s", len(empty), ", ".join(empty))
    return [ens for ens in test if len(ens) > 0]


def _load_checkpoint(settings: Settings, checkpoint_path: Path | None) -> Checkpoint:
    return CheckpointDAO.load(_path(settings, checkpoint_path, settings.CHECKPOINT_FILE))


def _generate(
    settings: Settings,
    checkpoint: Checkpoint,
    molecules: Sequence[ConformerEnsemble],
    cfg: SamplerConfig,
) -> list[ConformerEnsemble]:
    """samples_per_reference * K conformers for every molecule"""
    graphs = [ens.graph for ens in molecules]
    counts = [settings.SAMPLE.samples_per_reference * len(ens) for ens in molecules]
    samples = sample_many(
        checkpoint.theta,
        checkpoint.phi,
        graphs,
        build_priors(molecules),
        cfg,
        counts,
        settings.WORKERS,
    )
    return [
        ConformerEnsemble(graph=g, conformers=confs)
        for g, confs in zip(graphs, samples, strict=True)
    ]


def _gen_meta(cfg: SamplerConfig) -> dict[str, Any]:
    keys = SerializationKeys
    return {
        keys.N_STEPS.value: cfg.n_steps,
        keys.AMPLITUDE.value: cfg.amplitude,
        keys.GUIDED.value: cfg.guided,
        keys.SEED.value: cfg.seed,
    }


def run_gen(settings: Settings) -> Path:
    """Generate the synthetic dataset into OUT_DIR"""
    settings.check()
    _record_settings(settings)
    dataset = gen_synthetic(settings.DATA.synthetic, settings.SEED)
    path = settings.out_path(settings.DATASET_FILE)
    DatasetDAO.save(dataset, path)
    logging.getLogger("Commands").info("Wrote %d molecules to %s", len(dataset), path)
    return path


def run_train(settings: Settings, dataset_path: Path | None = None) -> TrainOutputs:
    """
    Joint training on the train split, then optional reflow of theta.

    Raises:
        FileNotFoundError: the dataset file is missing
        EmptyDataset: the train split is empty
    """
    logger = logging.getLogger("Commands")
    settings.check()
    _record_settings(settings)
    dataset = _load_dataset(settings, dataset_path)
    train = DatasetDAO.split(dataset, settings.DATA.split).train
    if not train:
        raise EmptyDataset("The train split is empty")
    cfg = settings.TRAIN.model_copy(update={"seed": settings.SEED})

    result = train_joint(
        train, cfg, settings.MODEL.theta_config(), settings.MODEL.phi_config()
    )
    theta = result.theta
    history = result.history
    if cfg.reflow_steps > 0:
        theta = reflow_finetune(
            theta, train, build_priors(train), cfg.reflow_ode_steps, cfg, history
        )

    checkpoint_path = settings.out_path(settings.CHECKPOINT_FILE)
    history_path = settings.out_path(settings.HISTORY_FILE)
    meta: dict[str, Any] = {
        "seed": settings.SEED,
        "tag": settings.DATA.tag,
        "n_train": len(train),
        "reflow_steps": cfg.reflow_steps,
        "theta_checksum": theta.checksum(),
        "phi_checksum": result.phi.checksum(),
    }
    CheckpointDAO.save(Checkpoint(theta=theta, phi=result.phi, meta=meta), checkpoint_path)
    write_history_csv(history, history_path)
    logger.info("Wrote %s and %s", checkpoint_path, history_path)
    return TrainOutputs(checkpoint=checkpoint_path, history=history_path)


def run_sample(
    settings: Settings,
    checkpoint_path: Path | None = None,
    dataset_path: Path | None = None,
) -> Path:
    """Sample samples_per_reference * K conformers for every test molecule"""
    settings.check()
    _record_settings(settings)
    checkpoint = _load_checkpoint(settings, checkpoint_path)
    molecules = _evaluation_molecules(settings, _load_dataset(settings, dataset_path))
    cfg = settings.SAMPLE.sampler(settings.DATA.tag, settings.SEED)
    generated = _generate(settings, checkpoint, molecules, cfg)
    path = settings.out_path(settings.GENERATED_FILE)
    DatasetDAO.save(generated, path, gen_meta=_gen_meta(cfg))
    logging.getLogger("Commands").info(
        "Wrote %d generated ensembles (N=%d, a=%g, guided=%s) to %s",
        len(generated),
        cfg.n_steps,
        cfg.amplitude,
        cfg.guided,
        path,
    )
    return path


def run_certify(
    settings: Settings,
    checkpoint_path: Path | None = None,
    dataset_path: Path | None = None,
) -> CertifyOutputs:
    """Certify a ground state for every test molecule and score it against the labels"""
    settings.check()
    _record_settings(settings)
    checkpoint = _load_checkpoint(settings, checkpoint_path)
    molecules = _evaluation_molecules(settings, _load_dataset(settings, dataset_path))
    sample_cfg = settings.SAMPLE
    cfg = sample_cfg.certifier(settings.SEED)

    predictions: list[Prediction] = []
    for prior, ens in zip(build_priors(molecules), molecules, strict=True):
        conformation = certify_ground_state(
            checkpoint.theta,
            checkpoint.phi,
            ens.graph,
            prior,
            sample_cfg.mode,
            sample_cfg.ensemble_size,
            cfg,
            settings.WORKERS,
        )
        predictions.append(
            Prediction(
                mol_id=ens.mol_id,
                conformation=conformation,
                predicted_energy=energy(checkpoint.phi, ens.graph, conformation),
                mode=sample_cfg.mode.value,
                ensemble_size=sample_cfg.ensemble_size,
            )
        )
    predictions_path = settings.out_path(settings.PREDICTIONS_FILE)
    DatasetDAO.save_predictions(predictions, predictions_path)

    report: GroundStateReport = evaluate_ground_states(
        molecules, {p.mol_id: p.conformation for p in predictions}
    )
    report_path = settings.out_path(settings.GROUND_STATE_FILE)
    report.save(report_path)
    logging.getLogger("Commands").info(
        "%s (M=%d): D-MAE=%.4f D-RMSE=%.4f C-RMSD=%.4f",
        sample_cfg.mode.value,
        sample_cfg.ensemble_size,
        report.d_mae,
        report.d_rmse,
        report.c_rmsd,
    )
    return CertifyOutputs(predictions=predictions_path, report=report_path)


def run_eval(
    settings: Settings,
    dataset_path: Path | None = None,
    generated_path: Path | None = None,
) -> EvalOutputs:
    """COV and AMR of a generated file against the references it covers"""
    settings.check()
    _record_settings(settings)
    references = _load_dataset(settings, dataset_path)
    generated = DatasetDAO.load(_path(settings, generated_path, settings.GENERATED_FILE))
    wanted = {ens.mol_id for ens in generated}
    molecules = [ens for ens in references if ens.mol_id in wanted]
    if not molecules:
        raise EmptyDataset("No generated ensemble matches a reference molecule")
    report: MetricReport = evaluate_generation(
        molecules, generated, settings.EVAL.resolved_delta(settings.DATA.tag), settings.WORKERS
    )
    outputs = EvalOutputs(
        csv=settings.out_path(settings.METRICS_CSV_FILE),
        json=settings.out_path(settings.METRICS_JSON_FILE),
    )
    report.save(outputs.csv, outputs.json)
    return outputs


def _mean_coverage(matrices: Sequence[NDArray[np.float64]], delta: float, precision: bool) -> float:
    return float(np.mean([coverage_from_matrix(m.T if precision else m, delta) for m in matrices]))


def _mean_amr(matrices: Sequence[NDArray[np.float64]], precision: bool) -> float:
    return float(np.mean([amr_from_matrix(m.T if precision else m) for m in matrices]))


class AblationRow(NamedTuple):
    """One long-format value; ensemble_size and delta are None where they do not apply"""

    study: str
    n_steps: int
    amplitude: float
    ensemble_size: int | None
    metric: str
    value: float
    delta: float | None = None

    def as_row(self) -> list[str]:
        """CSV cells, floats at full precision"""
        return [
            self.study,
            str(self.n_steps),
            repr(self.amplitude),
            "" if self.ensemble_size is None else str(self.ensemble_size),
            self.metric,
            repr(self.value),
            "" if self.delta is None else repr(self.delta),
        ]


def _matrices(
    settings: Settings,
    molecules: Sequence[ConformerEnsemble],
    generated: Sequence[ConformerEnsemble],
) -> list[NDArray[np.float64]]:
    return [
        rmsd_matrix(list(ref.conformers), list(gen.conformers), settings.WORKERS)
        for ref, gen in zip(molecules, generated, strict=True)
    ]


def _grid_rows(
    settings: Settings, checkpoint: Checkpoint, molecules: Sequence[ConformerEnsemble]
) -> list[AblationRow]:
    logger = logging.getLogger("Ablation")
    delta = settings.EVAL.resolved_delta(settings.DATA.tag)
    rows: list[AblationRow] = []
    for n_steps in settings.EVAL.ablation_steps:
        for amplitude in settings.EVAL.ablation_amplitudes:
            cfg = SamplerConfig(n_steps=n_steps, amplitude=amplitude, guided=True, seed=settings.SEED)
            generated = _generate(settings, checkpoint, molecules, cfg)
            matrices = _matrices(settings, molecules, generated)

            def row(metric: str, value: float, at: float | None = None) -> AblationRow:
                return AblationRow(STUDY_GRID, n_steps, amplitude, None, metric, value, at)

            rows.append(row("cov_r", _mean_coverage(matrices, delta, False), delta))
            rows.append(row("amr_r", _mean_amr(matrices, False)))
            rows.append(row("cov_p", _mean_coverage(matrices, delta, True), delta))
            rows.append(row("amr_p", _mean_amr(matrices, True)))
            for grid_delta in settings.EVAL.delta_grid:
                rows.append(row("cov_r_curve", _mean_coverage(matrices, grid_delta, False), grid_delta))
                rows.append(row("cov_p_curve", _mean_coverage(matrices, grid_delta, True), grid_delta))

            all_energies = [
                energies(checkpoint.phi, [gen.graph] * len(gen), gen.conformers) for gen in generated
            ]
            mean_energy = float(np.mean(np.concatenate(all_energies)))
            rows.append(row("mean_energy", mean_energy))
            logger.info("N=%d a=%g: mean J=%.5g", n_steps, amplitude, mean_energy)
    return rows


def _ensemble_rows(
    settings: Settings, checkpoint: Checkpoint, molecules: Sequence[ConformerEnsemble]
) -> list[AblationRow]:
    labelled = [ens for ens in molecules if ens.energies is not None]
    if not labelled:
        logging.getLogger("Ablation").warning("No labelled molecules, skipping the ensemble size study")
        return []
    mode = settings.SAMPLE.mode
    cfg = settings.SAMPLE.certifier(settings.SEED)
    priors = build_priors(labelled)
    rows: list[AblationRow] = []
    for m in settings.EVAL.ablation_ensemble_sizes:
        predicted = {
            ens.mol_id: certify_ground_state(
                checkpoint.theta, checkpoint.phi, ens.graph, prior, mode, m, cfg, settings.WORKERS
            )
            for prior, ens in zip(priors, labelled, strict=True)
        }
        report = evaluate_ground_states(labelled, predicted)
        for metric, value in (("c_rmsd", report.c_rmsd), ("d_mae", report.d_mae), ("d_rmse", report.d_rmse)):
            rows.append(AblationRow(STUDY_ENSEMBLE, cfg.n_steps, cfg.amplitude, m, metric, value))
        logging.getLogger("Ablation").info("%s M=%d: C-RMSD=%.4f", mode.value, m, report.c_rmsd)
    return rows


def _reflow_rows(
    settings: Settings,
    checkpoint: Checkpoint,
    molecules: Sequence[ConformerEnsemble],
    train: Sequence[ConformerEnsemble],
) -> list[AblationRow]:
    """AMR before and after reflow_finetune of theta, sampled with the tag's schedule"""
    cfg = settings.TRAIN.model_copy(
        update={"seed": settings.SEED, "reflow_steps": settings.EVAL.ablation_reflow_steps}
    )
    reflowed = Checkpoint(
        theta=reflow_finetune(checkpoint.theta, train, build_priors(train), cfg.reflow_ode_steps, cfg),
        phi=checkpoint.phi,
        meta={},
    )
    rows: list[AblationRow] = []
    for n_steps in settings.EVAL.ablation_steps:
        section = settings.SAMPLE.model_copy(update={"n_steps": n_steps})
        sampler = section.sampler(settings.DATA.tag, settings.SEED)
        for variant, source in (("base", checkpoint), ("reflow", reflowed)):
            matrices = _matrices(settings, molecules, _generate(settings, source, molecules, sampler))
            for kind, precision in (("r", False), ("p", True)):
                value = _mean_amr(matrices, precision)
                rows.append(AblationRow(STUDY_REFLOW, n_steps, sampler.amplitude, None, f"amr_{kind}_{variant}", value))
    return rows


def ablation_rows(
    settings: Settings,
    theta: ModelParams,
    phi: ModelParams,
    molecules: Sequence[ConformerEnsemble],
    train: Sequence[ConformerEnsemble] = (),
) -> list[AblationRow]:
    """
    Long-format rows of three studies.

    steps_amplitude: for every (n_steps, amplitude) grid point, mean COV/AMR
    recall and precision at the evaluation delta, mean COV-R/COV-P at every
    delta of the grid and the mean J_phi of the generated conformers.
    ensemble_size: D-MAE, D-RMSE and C-RMSD of the certification mode at
    every ensemble size M.
    reflow: AMR of the checkpoint and of its reflowed copy at every n_steps;
    skipped when ablation_reflow_steps is 0 or train is empty.

    Every sampling call uses the same seed.
    """
    checkpoint = Checkpoint(theta=theta, phi=phi, meta={})
    rows = _grid_rows(settings, checkpoint, molecules)
    rows.extend(_ensemble_rows(settings, checkpoint, molecules))
    if settings.EVAL.ablation_reflow_steps > 0 and train:
        rows.extend(_reflow_rows(settings, checkpoint, molecules, train))
    elif settings.EVAL.ablation_reflow_steps > 0:
        logging.getLogger("Ablation").warning("The train split is empty, skipping the reflow study")
    return rows


def run_ablation(
    settings: Settings,
    checkpoint_path: Path | None = None,
    dataset_path: Path | None = None,
) -> Path:
    """Write the ablation rows as CSV with the ABLATION_COLUMNS header"""
    settings.check()
    _record_settings(settings)
    checkpoint = _load_checkpoint(settings, checkpoint_path)
    dataset = _load_dataset(settings, dataset_path)
    molecules = _evaluation_molecules(settings, dataset)
    train = DatasetDAO.split(dataset, settings.DATA.split).train
    rows = ablation_rows(settings, checkpoint.theta, checkpoint.phi, molecules, train)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ABLATION_COLUMNS)
    for row in rows:
        writer.writerow(row.as_row())
    path = settings.out_path(settings.ABLATION_FILE)
    atomic_write_text(buffer.getvalue(), path)
    return path
