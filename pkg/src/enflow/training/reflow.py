"""
Reflow fine-tuning of the vector field.

Coupled pairs (c0', c1') are generated once: c0' from the prior and c1' by
integrating the current unguided flow from it. The vector field is then
trained on Brownian-bridge paths between the coupled endpoints, which
straightens trajectories and helps few-step sampling. The energy model is
not touched.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from enflow.errors import ConfigError, EmptyDataset
from enflow.models import Conformation, ConformerEnsemble, MolGraph
from enflow.nn.params import ModelParams
from enflow.prior import HarmonicPrior
from enflow.sampling.config import SamplerConfig
from enflow.sampling.sampler import sample_ode
from enflow.training.config import TrainConfig
from enflow.training.losses import loss_sbcfm
from enflow.training.optim import make_optimizer
from enflow.training.paths import PathSample, make_path_sample
from enflow.training.trainer import PHASE_REFLOW, HistoryRow

REFLOW_SEED_OFFSET: int = 7919


@dataclass(frozen=True)
class ReflowPair:
    """Prior sample and the unguided model output integrated from it"""

    graph: MolGraph
    c0p: Conformation
    c1p: Conformation


def make_reflow_pairs(
    params_theta: ModelParams,
    dataset: Sequence[ConformerEnsemble],
    priors: Sequence[HarmonicPrior],
    n_ode_steps: int,
    pairs_per_molecule: int,
    seed: int,
) -> list[ReflowPair]:
    """Generate the coupled pairs with a fixed-step unguided sampler"""
    if n_ode_steps < 1:
        raise ConfigError(f"Reflow needs at least one ODE step, got {n_ode_steps}")
    rng = np.random.default_rng(seed)
    cfg = SamplerConfig(n_steps=n_ode_steps, amplitude=0.0, guided=False, seed=seed)
    pairs: list[ReflowPair] = []
    for ensemble, prior in zip(dataset, priors, strict=True):
        for _ in range(pairs_per_molecule):
            c0p = prior.sample_with(rng)
            c1p = sample_ode(params_theta, None, ensemble.graph, prior, cfg, initial=c0p)
            pairs.append(ReflowPair(graph=ensemble.graph, c0p=c0p, c1p=c1p))
    return pairs


def reflow_finetune(
    params_theta: ModelParams,
    dataset: Sequence[ConformerEnsemble],
    priors: Sequence[HarmonicPrior],
    n_ode_steps: int,
    cfg: TrainConfig,
    history: list[HistoryRow] | None = None,
) -> ModelParams:
    """
    Fine-tune a copy of theta on coupled pairs.

    Args:
        params_theta: Trained vector field, left unchanged
        dataset: Molecules to build pairs for
        priors: Harmonic prior of each molecule, in dataset order
        n_ode_steps: Euler steps used to integrate each pair
        cfg: reflow_steps, reflow_lr, batch size, sigma and seed
        history: Optional list the per-step losses are appended to

    Raises:
        ConfigError: n_ode_steps < 1
    """
    logger = logging.getLogger("Reflow")
    cfg.check()
    if n_ode_steps < 1:
        raise ConfigError(f"Reflow needs at least one ODE step, got {n_ode_steps}")
    theta = params_theta.copy()
    if cfg.reflow_steps == 0:
        return theta
    if not dataset:
        raise EmptyDataset("Reflow needs at least one molecule")

    seed = cfg.seed + REFLOW_SEED_OFFSET
    pairs = make_reflow_pairs(
        params_theta, dataset, priors, n_ode_steps, cfg.reflow_pairs_per_molecule, seed
    )
    logger.info("Generated %d reflow pairs with %d ODE steps", len(pairs), n_ode_steps)

    rng = np.random.default_rng(seed + 1)
    optimizer = make_optimizer(cfg, cfg.reflow_lr)
    for step in range(cfg.reflow_steps):
        batch: list[PathSample] = []
        for _ in range(cfg.batch_size):
            pair = pairs[int(rng.integers(len(pairs)))]
            t = float(rng.uniform(cfg.t_min, 1.0 - cfg.t_min))
            batch.append(make_path_sample(pair.graph, pair.c0p, pair.c1p, t, cfg.sigma, rng))
        loss = loss_sbcfm(theta, batch)
        optimizer.step(theta, loss.grads)
        if history is not None:
            history.append(HistoryRow(len(history) + 1, PHASE_REFLOW, loss.value, None, None))
        if (step + 1) % cfg.log_every == 0 or step == 0:
            logger.info("reflow %d/%d: sbcfm=%.5g", step + 1, cfg.reflow_steps, loss.value)
    return theta
