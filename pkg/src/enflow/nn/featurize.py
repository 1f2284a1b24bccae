"""
Pair and time features.

Distances are expanded on exponential radial basis functions
exp(-beta * (exp(-d) - mu_k)^2), with centers mu_k evenly spaced between
exp(-d_cutoff) and 1, and damped by the cosine cutoff
0.5 * (cos(pi * d / d_cutoff) + 1), zero beyond d_cutoff.
Each function has a numpy form and a differentiable Tensor form.
"""

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from enflow.autodiff import Tensor, ops
from enflow.nn.config import FeaturizerConfig


def rbf_centers(cfg: FeaturizerConfig) -> NDArray[np.float64]:
    """Centers mu_k, ascending"""
    return np.linspace(math.exp(-cfg.d_cutoff), 1.0, cfg.n_rbf)


def rbf_width(cfg: FeaturizerConfig) -> float:
    """Shared inverse width beta"""
    return (2.0 / cfg.n_rbf * (1.0 - math.exp(-cfg.d_cutoff))) ** -2


def rbf(d: float | ArrayLike, cfg: FeaturizerConfig) -> NDArray[np.float64]:
    """Radial basis expansion; a scalar gives n_rbf values, an array gets a trailing axis"""
    dist = np.asarray(d, dtype=np.float64)
    return np.exp(-rbf_width(cfg) * (np.exp(-dist)[..., None] - rbf_centers(cfg)) ** 2)


def cutoff(d: float | ArrayLike, cfg: FeaturizerConfig) -> NDArray[np.float64]:
    """Cosine cutoff in [0, 1]"""
    dist = np.asarray(d, dtype=np.float64)
    inside = dist <= cfg.d_cutoff
    return np.where(inside, 0.5 * (np.cos(math.pi * dist / cfg.d_cutoff) + 1.0), 0.0)


def rbf_tensor(d: Tensor, cfg: FeaturizerConfig) -> Tensor:
    """Differentiable rbf of an E x 1 distance column, shape E x n_rbf"""
    n_edges = d.shape[0]
    decay = ops.expand_cols(ops.exp(-d), cfg.n_rbf)
    centers = Tensor(np.broadcast_to(rbf_centers(cfg), (n_edges, cfg.n_rbf)))
    return ops.exp(ops.scale(ops.square(decay - centers), -rbf_width(cfg)))


def cutoff_tensor(d: Tensor, cfg: FeaturizerConfig) -> Tensor:
    """Differentiable cutoff of an E x 1 distance column"""
    # the mask is constant; value and slope both vanish at d_cutoff
    mask = Tensor((d.data <= cfg.d_cutoff).astype(np.float64))
    wave = ops.cos(ops.scale(d, math.pi / cfg.d_cutoff))
    half = ops.scale(wave + Tensor(np.ones(d.shape)), 0.5)
    return ops.mul(half, mask)


def time_features(t: NDArray[np.float64], n_freqs: int) -> NDArray[np.float64]:
    """sin and cos of pi * 2^k * t for k < n_freqs, one row per entry of t"""
    freqs = math.pi * 2.0 ** np.arange(n_freqs)
    angles = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
