"""
Energy-guided Euler sampling.

Starting from a prior sample, N Euler steps of size 1/N follow

    v'(c_t) = v_theta(c_t, t) - lambda_t * grad J_phi(c1_hat),
    c1_hat  = c_t + (1 - t) v_theta(c_t, t),

with lambda_t evaluated at the left end of each step. The gradient is taken
at c1_hat with v_theta held fixed. The final conformation is re-centered.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from enflow.models import Conformation, MolGraph
from enflow.nn.network import energy_grad, vector_field
from enflow.nn.params import ModelParams
from enflow.prior import HarmonicPrior
from enflow.sampling.config import SamplerConfig
from enflow.sampling.schedule import GuidanceSchedule

Array = NDArray[np.float64]
VelocityFn = Callable[[Array, float], Array]


def x1_hat(c_t: Array, t: float, v: Array) -> Array:
    """One-shot extrapolation c_t + (1 - t) v to t = 1"""
    return np.asarray(c_t, dtype=np.float64) + (1.0 - t) * np.asarray(v, dtype=np.float64)


def guided_field(
    params_theta: ModelParams | None,
    params_phi: ModelParams | None,
    g: MolGraph,
    c_t: Array,
    t: float,
    schedule: GuidanceSchedule,
    velocity: VelocityFn | None = None,
) -> Array:
    """
    v_theta(c_t, t) - lambda_t * grad J_phi(c1_hat).

    Without params_phi, or where lambda_t is zero, the bare field is returned
    and no energy gradient is evaluated. velocity replaces v_theta when given.
    """
    if velocity is not None:
        v = np.asarray(velocity(c_t, t), dtype=np.float64)
    elif params_theta is not None:
        v = vector_field(params_theta, g, c_t, t)
    else:
        raise ValueError("guided_field needs a vector field")
    lam = schedule.lam(t)
    if params_phi is None or lam == 0.0:
        return v
    return v - lam * energy_grad(params_phi, g, x1_hat(c_t, t, v))


def sample_ode(
    params_theta: ModelParams | None,
    params_phi: ModelParams | None,
    g: MolGraph,
    prior: HarmonicPrior,
    cfg: SamplerConfig,
    initial: Conformation | None = None,
    velocity: VelocityFn | None = None,
) -> Conformation:
    """
    Integrate the (guided) flow from t = 0 to t = 1.

    Args:
        params_theta: Vector field parameters
        params_phi: Energy parameters; without them the flow is unguided
        g: Molecule
        prior: Harmonic prior of g
        cfg: Step count, guidance amplitude and seed
        initial: Starting conformation instead of a prior draw with cfg.seed
        velocity: Field to use instead of v_theta

    Raises:
        ConfigError: fewer than one step
    """
    cfg.check()
    if velocity is None and params_theta is None:
        raise ValueError("sample_ode needs a vector field")
    schedule = cfg.schedule
    phi = params_phi if cfg.guided else None

    c = (initial if initial is not None else prior.sample(cfg.seed)).coords.copy()
    dt = cfg.dt
    for i in range(cfg.n_steps):
        c = c + guided_field(params_theta, phi, g, c, i * dt, schedule, velocity) * dt
    return Conformation(c).center()


def sample_ensemble(
    params_theta: ModelParams,
    params_phi: ModelParams | None,
    g: MolGraph,
    prior: HarmonicPrior,
    cfg: SamplerConfig,
    n_samples: int,
    workers: int = 1,
) -> list[Conformation]:
    """
    n_samples independent trajectories with seeds cfg.seed + m.

    Results come back in seed order whatever the number of workers.
    """
    configs = [cfg.with_seed(cfg.seed + m) for m in range(n_samples)]

    def run(sample_cfg: SamplerConfig) -> Conformation:
        return sample_ode(params_theta, params_phi, g, prior, sample_cfg)

    logging.getLogger("Sampler").debug(
        "Sampling %d conformers of %s with N=%d, a=%g, guided=%s",
        n_samples,
        g.mol_id,
        cfg.n_steps,
        cfg.amplitude,
        cfg.guided,
    )
    if workers <= 1 or n_samples <= 1:
        return [run(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def sample_many(
    params_theta: ModelParams,
    params_phi: ModelParams | None,
    graphs: Sequence[MolGraph],
    priors: Sequence[HarmonicPrior],
    cfg: SamplerConfig,
    counts: Sequence[int],
    workers: int = 1,
) -> list[list[Conformation]]:
    """Ensembles for several molecules, each with its own seed block"""
    result: list[list[Conformation]] = []
    offset = 0
    for g, prior, count in zip(graphs, priors, counts, strict=True):
        result.append(
            sample_ensemble(
                params_theta, params_phi, g, prior, cfg.with_seed(cfg.seed + offset), count, workers
            )
        )
        offset += count
    return result
