"""Gradient-based parameter updates with global-norm clipping"""

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from enflow.nn.params import ModelParams
from enflow.training.config import OptimizerKind, TrainConfig

Array = NDArray[np.float64]


def global_norm(grads: Mapping[str, Array]) -> float:
    """Euclidean norm of every gradient entry together"""
    return math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads: Mapping[str, Array], max_norm: float) -> dict[str, Array]:
    """Rescale the gradients so their global norm is at most max_norm"""
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return dict(grads)
    factor = max_norm / norm
    return {name: g * factor for name, g in grads.items()}


@dataclass
class SGD:
    """Plain gradient descent"""

    lr: float
    clip_norm: float = 10.0

    def step(self, params: ModelParams, grads: Mapping[str, Array]) -> None:
        """Update params in place"""
        if self.lr == 0.0:
            return
        for name, g in clip_by_global_norm(grads, self.clip_norm).items():
            params.arrays[name] = params.arrays[name] - self.lr * g


@dataclass
class Adam:
    """Adam moments on top of the clipped gradient"""

    lr: float
    clip_norm: float = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: dict[str, Array] = field(default_factory=dict)
    _v: dict[str, Array] = field(default_factory=dict)
    _t: int = 0

    def step(self, params: ModelParams, grads: Mapping[str, Array]) -> None:
        """Update params in place"""
        if self.lr == 0.0:
            return
        self._t += 1
        bias1 = 1.0 - self.beta1**self._t
        bias2 = 1.0 - self.beta2**self._t
        for name, g in clip_by_global_norm(grads, self.clip_norm).items():
            m = self.beta1 * self._m.get(name, np.zeros_like(g)) + (1.0 - self.beta1) * g
            v = self.beta2 * self._v.get(name, np.zeros_like(g)) + (1.0 - self.beta2) * g * g
            self._m[name] = m
            self._v[name] = v
            params.arrays[name] = params.arrays[name] - self.lr * (m / bias1) / (
                np.sqrt(v / bias2) + self.eps
            )


Optimizer = SGD | Adam


def make_optimizer(cfg: TrainConfig, lr: float) -> Optimizer:
    """Optimizer selected by the config, with the given learning rate"""
    if cfg.optimizer == OptimizerKind.ADAM:
        return Adam(
            lr=lr,
            clip_norm=cfg.clip_norm,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            eps=cfg.adam_eps,
        )
    return SGD(lr=lr, clip_norm=cfg.clip_norm)
