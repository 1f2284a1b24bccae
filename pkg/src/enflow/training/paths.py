"""
Brownian-bridge conditional paths between a prior sample c0 and a data sample c1.

    c_t'     = (1 - t) c0 + t c1
    c_t      = c_t' + sigma sqrt(t (1 - t)) eps
    s_t      = c1 - c0
    v_target = (1 - 2t) / (2t (1 - t)) (c_t - c_t') + s_t
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from enflow.errors import ConfigError, ShapeError
from enflow.models import Conformation, MolGraph

Array = NDArray[np.float64]


@dataclass(frozen=True)
class PathSample:
    """One point on a conditional path, with its regression target"""

    graph: MolGraph
    t: float
    c0: Conformation
    c1: Conformation
    c_t_prime: Array
    c_t: Array
    s_t: Array
    v_target: Array
    eps: Array


def target_coefficient(t: float) -> float:
    """(1 - 2t) / (2t (1 - t)), finite on the open interval"""
    return (1.0 - 2.0 * t) / (2.0 * t * (1.0 - t))


def make_path_sample(
    g: MolGraph,
    c0: Conformation,
    c1: Conformation,
    t: float,
    sigma: float,
    rng: np.random.Generator | None = None,
    eps: Array | None = None,
) -> PathSample:
    """
    Draw a point of the conditional path at time t.

    Args:
        g: Graph of the molecule
        c0: Prior sample
        c1: Data sample
        t: Time in the open interval (0, 1)
        sigma: Bridge noise scale
        rng: Source of the standard normal noise
        eps: Noise to use instead of drawing it

    Raises:
        ShapeError: c0, c1 and g disagree on the number of atoms
        ConfigError: t outside (0, 1) or negative sigma
    """
    if c0.n_atoms != c1.n_atoms or c0.n_atoms != g.n_atoms:
        raise ShapeError(
            f"Path endpoints with {c0.n_atoms} and {c1.n_atoms} atoms for a {g.n_atoms}-atom graph"
        )
    if not 0.0 < t < 1.0:
        raise ConfigError(f"Path time must lie in (0, 1), got {t}")
    if sigma < 0:
        raise ConfigError(f"sigma must be non-negative, got {sigma}")

    if eps is None:
        if rng is None:
            raise ConfigError("Either rng or eps is required")
        noise = rng.standard_normal((g.n_atoms, 3))
    else:
        noise = np.asarray(eps, dtype=np.float64)
        if noise.shape != (g.n_atoms, 3):
            raise ShapeError(f"Noise of shape {noise.shape} for {g.n_atoms} atoms")

    c_t_prime = (1.0 - t) * c0.coords + t * c1.coords
    offset = sigma * math.sqrt(t * (1.0 - t)) * noise
    c_t = c_t_prime + offset
    s_t = c1.coords - c0.coords
    v_target = target_coefficient(t) * offset + s_t
    return PathSample(
        graph=g,
        t=t,
        c0=c0,
        c1=c1,
        c_t_prime=c_t_prime,
        c_t=c_t,
        s_t=s_t,
        v_target=v_target,
        eps=noise,
    )
