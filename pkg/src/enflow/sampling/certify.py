"""Ground-state certification from one guided sample or an energy-ranked ensemble"""

import logging
from collections.abc import Sequence

import numpy as np

from enflow.errors import ConfigError, EmptyEnsemble
from enflow.models import Conformation, MolGraph
from enflow.nn.network import energies
from enflow.nn.params import ModelParams
from enflow.prior import HarmonicPrior
from enflow.sampling.config import CertMode, SamplerConfig
from enflow.sampling.sampler import sample_ensemble, sample_ode


def select_lowest_energy(candidate_energies: Sequence[float]) -> int:
    """Index of the smallest energy, ties to the lowest index"""
    if len(candidate_energies) == 0:
        raise EmptyEnsemble("No candidates to select from")
    # np.argmin returns the first minimum
    return int(np.argmin(np.asarray(candidate_energies, dtype=np.float64)))


def certify_ground_state(
    params_theta: ModelParams,
    params_phi: ModelParams,
    g: MolGraph,
    prior: HarmonicPrior,
    mode: str | CertMode,
    m: int,
    cfg: SamplerConfig,
    workers: int = 1,
) -> Conformation:
    """
    Predict the ground-state conformation of a molecule.

    JustFM returns the guided sample drawn with cfg.seed. EnsembleCert draws
    m guided samples with seeds cfg.seed + k and keeps the one with the
    lowest J_phi.

    Raises:
        ConfigError: unknown mode, or m < 1 in EnsembleCert mode
    """
    cert_mode = CertMode.parse(mode)
    if cert_mode == CertMode.JUSTFM:
        return sample_ode(params_theta, params_phi, g, prior, cfg)

    if m < 1:
        raise ConfigError(f"EnsembleCert needs at least one candidate, got {m}")
    candidates = sample_ensemble(params_theta, params_phi, g, prior, cfg, m, workers)
    scores = energies(params_phi, [g] * m, candidates)
    best = select_lowest_energy(scores.tolist())
    logging.getLogger("Certify").debug(
        "%s: candidate %d of %d selected, J=%r", g.mol_id, best, m, float(scores[best])
    )
    return candidates[best]
