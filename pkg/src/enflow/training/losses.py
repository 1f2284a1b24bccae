"""
Training objectives and their parameter gradients.

The energy matching loss regresses -grad_c J_phi at the noiseless
interpolation onto the straight displacement. Its phi-gradient needs the
mixed derivative d/dphi grad_c J; because mixed partials commute it equals
the phi-gradient of the directional derivative of J along the fixed
residual direction, which is taken by a central difference of two
first-order phi-gradients.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from enflow.autodiff import Tape, Tensor, grad, ops
from enflow.errors import ConfigError, EmptyBatch, MissingLabels
from enflow.models import ConformerEnsemble, EnergyLabelNormalizer, MolGraph
from enflow.nn.config import NetKind
from enflow.nn.network import energy_tensor, pack, vector_field_tensor
from enflow.nn.params import ModelParams
from enflow.training.paths import PathSample

Array = NDArray[np.float64]
FD_RELATIVE_STEP: float = 1e-5


@dataclass(frozen=True)
class LossValue:
    """Loss value and its gradient for every parameter"""

    value: float
    grads: dict[str, Array] = field(default_factory=dict)

    def scaled(self, factor: float) -> "LossValue":
        """Value and gradients multiplied by a constant"""
        return LossValue(self.value * factor, {k: g * factor for k, g in self.grads.items()})

    def __add__(self, other: "LossValue") -> "LossValue":
        names = list(self.grads) + [k for k in other.grads if k not in self.grads]
        grads: dict[str, Array] = {}
        for name in names:
            parts = [g for g in (self.grads.get(name), other.grads.get(name)) if g is not None]
            grads[name] = parts[0] + parts[1] if len(parts) == 2 else parts[0].copy()
        return LossValue(self.value + other.value, grads)


def _param_grads(
    weights: dict[str, Tensor], loss: Tensor, tape: Tape
) -> dict[str, Array]:
    names = list(weights)
    return {
        name: g.data
        for name, g in zip(names, grad(loss, [weights[n] for n in names], tape), strict=True)
    }


def loss_sbcfm(params_theta: ModelParams, batch: Sequence[PathSample]) -> LossValue:
    """Mean over the batch of ||v_theta(c_t, t) - v_target||^2"""
    if not batch:
        raise EmptyBatch("The flow matching loss needs at least one path sample")
    graphs = [s.graph for s in batch]
    gb, coords = pack(params_theta, graphs, [s.c_t for s in batch])
    target = Tensor(np.concatenate([s.v_target for s in batch], axis=0))

    weights = params_theta.tensors(requires_grad=True)
    with Tape() as tape:
        predicted = vector_field_tensor(
            weights, params_theta.config, gb, Tensor(coords), [s.t for s in batch]
        )
        loss = ops.scale(ops.sum_all(ops.square(predicted - target)), 1.0 / len(batch))
    return LossValue(loss.item(), _param_grads(weights, loss, tape))


def _energy_param_grads(params_phi: ModelParams, graphs: list[MolGraph], coords: Array) -> dict[str, Array]:
    gb, _ = pack(params_phi, graphs, _blocks(graphs, coords))
    weights = params_phi.tensors(requires_grad=True)
    with Tape() as tape:
        total = ops.sum_all(energy_tensor(weights, params_phi.config, gb, Tensor(coords)))
    return _param_grads(weights, total, tape)


def _blocks(graphs: list[MolGraph], coords: Array) -> list[Array]:
    blocks: list[Array] = []
    start = 0
    for g in graphs:
        blocks.append(coords[start : start + g.n_atoms])
        start += g.n_atoms
    return blocks


def energy_matching_residual(
    params_phi: ModelParams, batch: Sequence[PathSample]
) -> tuple[Array, Array]:
    """
    Coordinate gradient of J at every c_t' and the residual -grad J - s_t.

    Returns:
        (stacked gradients, stacked residuals), both sum(n) x 3
    """
    graphs = [s.graph for s in batch]
    gb, coords = pack(params_phi, graphs, [s.c_t_prime for s in batch])
    weights = params_phi.tensors()
    with Tape() as tape:
        x = Tensor(coords, requires_grad=True)
        total = ops.sum_all(energy_tensor(weights, params_phi.config, gb, x))
    (gx,) = grad(total, [x], tape)
    s_t = np.concatenate([s.s_t for s in batch], axis=0)
    return gx.data, -gx.data - s_t


def loss_em(params_phi: ModelParams, batch: Sequence[PathSample]) -> LossValue:
    """Mean over the batch of ||-grad J_phi(c_t') - s_t||^2"""
    if not batch:
        raise EmptyBatch("The energy matching loss needs at least one path sample")
    if params_phi.kind != NetKind.ENERGY:
        raise ConfigError("The energy matching loss needs an energy network")

    graphs = [s.graph for s in batch]
    coords = np.concatenate([s.c_t_prime for s in batch], axis=0)
    _, residual = energy_matching_residual(params_phi, batch)
    value = float(np.sum(residual * residual)) / len(batch)

    direction = -residual
    scale = float(np.max(np.abs(direction)))
    if scale == 0.0:
        return LossValue(value, {name: np.zeros_like(a) for name, a in params_phi})

    h = FD_RELATIVE_STEP / scale
    plus = _energy_param_grads(params_phi, graphs, coords + h * direction)
    minus = _energy_param_grads(params_phi, graphs, coords - h * direction)
    factor = 1.0 / (len(batch) * h)
    grads = {name: (plus[name] - minus[name]) * factor for name in plus}
    return LossValue(value, grads)


def _labels(
    ensemble: ConformerEnsemble, normalizer: EnergyLabelNormalizer | None
) -> Array:
    if ensemble.energies is None:
        raise MissingLabels(f"Molecule '{ensemble.mol_id}' has no energy labels")
    norm = normalizer if normalizer is not None else ensemble.normalizer()
    return norm.normalize(ensemble.energies)


def loss_energy_batch(
    params_phi: ModelParams,
    items: Sequence[tuple[ConformerEnsemble, EnergyLabelNormalizer | None]],
) -> LossValue:
    """Mean absolute error of J_phi against normalized labels, pooled over every conformer"""
    graphs: list[MolGraph] = []
    confs: list[Array] = []
    labels: list[Array] = []
    for ensemble, normalizer in items:
        labels.append(_labels(ensemble, normalizer))
        graphs.extend([ensemble.graph] * len(ensemble))
        confs.extend(c.coords for c in ensemble.conformers)
    if not confs:
        raise EmptyBatch("The energy loss needs at least one labelled conformer")

    gb, coords = pack(params_phi, graphs, confs)
    target = Tensor(np.concatenate(labels).reshape(-1, 1))
    weights = params_phi.tensors(requires_grad=True)
    with Tape() as tape:
        pred = energy_tensor(weights, params_phi.config, gb, Tensor(coords))
        loss = ops.mean(ops.absolute(pred - target))
    return LossValue(loss.item(), _param_grads(weights, loss, tape))


def loss_energy(
    params_phi: ModelParams,
    ensemble: ConformerEnsemble,
    normalizer: EnergyLabelNormalizer | None = None,
) -> LossValue:
    """Mean absolute error of J_phi against one molecule's normalized labels"""
    return loss_energy_batch(params_phi, [(ensemble, normalizer)])


def loss_finetune(
    params_phi: ModelParams,
    batch: Sequence[PathSample],
    items: Sequence[tuple[ConformerEnsemble, EnergyLabelNormalizer | None]],
    eta_energy: float,
) -> tuple[LossValue, LossValue, LossValue]:
    """
    L_EM + eta_energy * L_energy.

    Returns:
        (combined, energy matching term, energy regression term)
    """
    if eta_energy < 0:
        raise ConfigError(f"eta_energy must be non-negative, got {eta_energy}")
    matching = loss_em(params_phi, batch)
    regression = loss_energy_batch(params_phi, items)
    logging.getLogger("Losses").debug(
        "Fine-tune terms: em=%r energy=%r", matching.value, regression.value
    )
    return matching + regression.scaled(eta_energy), matching, regression
