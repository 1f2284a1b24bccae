"""
Equivariant message passing surrogate used for both the vector field and the
energy model.

Node states start from an atom-type embedding (plus sinusoidal time features
for the vector field) and are refined by message layers over all ordered
atom pairs of a molecule:

    m_ij = MLP(h_i | h_j | rbf(d_ij) | bond_ij) * cutoff(d_ij)
    h_i += ssp(W [h_i | sum_j m_ij])
    v_i += sum_j gate(m_ij) * (r_i - r_j) / max(d_ij, eps)

Scalars only see distances, so they are invariant under rigid motions; the
vectors are sums of scalar-weighted relative positions, so they rotate with
the input and ignore translations. The energy is the mean-pooled node state
times a readout column.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from enflow.autodiff import Tape, Tensor, grad, ops
from enflow.errors import ModelError
from enflow.models import Conformation, MolGraph
from enflow.nn.config import NetConfig, NetKind
from enflow.nn.featurize import cutoff_tensor, rbf_tensor, time_features
from enflow.nn.graph_batch import GraphBatch
from enflow.nn.params import ModelParams

Array = NDArray[np.float64]
Weights = Mapping[str, Tensor]


@dataclass(frozen=True)
class NetOutput:
    """Invariant node states and equivariant per-atom vectors"""

    scalars: Array
    vectors: Array


def _node_states(
    weights: Weights,
    config: NetConfig,
    batch: GraphBatch,
    x: Tensor,
    t_nodes: Array | None,
) -> tuple[Tensor, Tensor | None]:
    n = batch.n_nodes
    hidden = config.hidden
    feat = config.featurizer

    rel = ops.pairwise_diff(x, batch.recv, batch.send)
    dist = ops.norm_rows(rel, feat.eps_norm)
    basis = rbf_tensor(dist, feat)
    if feat.bond_channel:
        basis = ops.concat([basis, Tensor(batch.bonded)])
    damp = ops.expand_cols(cutoff_tensor(dist, feat), hidden)

    h = ops.gather_rows(weights["embed"], batch.atom_types)
    if config.use_time:
        if t_nodes is None:
            raise ModelError("A time-conditioned network needs t")
        h = ops.concat([h, Tensor(time_features(t_nodes, config.time_freqs))])
    h = ops.shifted_softplus(ops.linear(h, weights["input.w"], weights["input.b"]))

    vectors: Tensor | None = None
    unit: Tensor | None = None
    if config.kind == NetKind.VECTOR:
        vectors = Tensor(np.zeros((n, 3)))
        unit = ops.div(rel, ops.expand_cols(dist, 3))

    for layer in range(config.n_layers):
        p = f"layer{layer}"
        pair = ops.concat(
            [ops.gather_rows(h, batch.recv), ops.gather_rows(h, batch.send), basis]
        )
        msg = ops.shifted_softplus(ops.linear(pair, weights[f"{p}.msg1.w"], weights[f"{p}.msg1.b"]))
        msg = ops.mul(ops.linear(msg, weights[f"{p}.msg2.w"], weights[f"{p}.msg2.b"]), damp)
        agg = ops.scatter_add_rows(msg, batch.recv, n)
        h = h + ops.shifted_softplus(
            ops.linear(ops.concat([h, agg]), weights[f"{p}.upd.w"], weights[f"{p}.upd.b"])
        )
        if vectors is not None and unit is not None:
            gate = ops.linear(msg, weights[f"{p}.gate.w"], weights[f"{p}.gate.b"])
            step = ops.mul(unit, ops.expand_cols(gate, 3))
            vectors = vectors + ops.scatter_add_rows(step, batch.recv, n)
    return h, vectors


def _pooled_energies(
    weights: Weights, config: NetConfig, batch: GraphBatch, x: Tensor
) -> Tensor:
    """Per-molecule energies, shape n_mols x 1"""
    h, _ = _node_states(weights, config, batch, x, None)
    summed = ops.scatter_add_rows(h, batch.node_mol, batch.n_mols)
    inv_counts = np.repeat(1.0 / batch.counts.reshape(-1, 1), config.hidden, axis=1)
    pooled = ops.mul(summed, Tensor(inv_counts))
    return ops.matmul(pooled, weights["readout.w"])


def _check_kind(params: ModelParams, kind: NetKind) -> None:
    if params.kind != kind:
        raise ModelError(f"Expected a {kind.value} network, got a {params.kind.value} network")


def pack(
    params: ModelParams,
    graphs: Sequence[MolGraph],
    confs: Sequence[Conformation | Array],
) -> tuple[GraphBatch, Array]:
    """Batch the graphs and stack their coordinates, checking sizes"""
    if len(graphs) != len(confs):
        raise ModelError(f"{len(graphs)} graphs for {len(confs)} conformations")
    blocks: list[Array] = []
    for graph, conf in zip(graphs, confs, strict=True):
        coords = conf.coords if isinstance(conf, Conformation) else np.asarray(conf, dtype=np.float64)
        if coords.shape != (graph.n_atoms, 3):
            raise ModelError(
                f"Coordinates of shape {coords.shape} for a {graph.n_atoms}-atom graph"
            )
        blocks.append(coords)
    batch = GraphBatch.from_graphs(graphs, params.config.n_atom_types)
    return batch, np.concatenate(blocks, axis=0)


def _node_times(batch: GraphBatch, ts: Sequence[float]) -> Array:
    times = np.asarray(ts, dtype=np.float64)
    if times.shape != (batch.n_mols,):
        raise ModelError(f"{times.size} time values for {batch.n_mols} molecules")
    if not np.all((times >= 0.0) & (times <= 1.0)):
        raise ModelError(f"t must lie in [0, 1], got {times.tolist()}")
    return times[batch.node_mol]


def forward(params: ModelParams, g: MolGraph, c: Conformation, t: float) -> NetOutput:
    """Node states and per-atom vectors of one molecule at time t"""
    batch, coords = pack(params, [g], [c])
    t_nodes = _node_times(batch, [t]) if params.config.use_time else None
    h, vectors = _node_states(params.tensors(), params.config, batch, Tensor(coords), t_nodes)
    return NetOutput(
        scalars=h.numpy(),
        vectors=np.zeros((g.n_atoms, 3)) if vectors is None else vectors.numpy(),
    )


def vector_field_tensor(
    weights: Weights,
    config: NetConfig,
    batch: GraphBatch,
    x: Tensor,
    ts: Sequence[float],
) -> Tensor:
    """Differentiable vector field of a packed batch"""
    _, vectors = _node_states(weights, config, batch, x, _node_times(batch, ts))
    if vectors is None:
        raise ModelError("The energy network has no vector head")
    return vectors


def energy_tensor(weights: Weights, config: NetConfig, batch: GraphBatch, x: Tensor) -> Tensor:
    """Differentiable per-molecule energies of a packed batch, n_mols x 1"""
    return _pooled_energies(weights, config, batch, x)


def vector_field(params: ModelParams, g: MolGraph, c: Conformation | Array, t: float) -> Array:
    """v_theta(c, t), one 3-vector per atom"""
    return vector_field_batch(params, [g], [c], [t])[0]


def vector_field_batch(
    params: ModelParams,
    graphs: Sequence[MolGraph],
    confs: Sequence[Conformation | Array],
    ts: Sequence[float],
) -> list[Array]:
    """Vector fields of several molecules in one pass"""
    _check_kind(params, NetKind.VECTOR)
    batch, coords = pack(params, graphs, confs)
    field = vector_field_tensor(params.tensors(), params.config, batch, Tensor(coords), ts)
    return [block.copy() for block in batch.split(field.data)]


def energies(
    params: ModelParams,
    graphs: Sequence[MolGraph],
    confs: Sequence[Conformation | Array],
) -> Array:
    """J_phi of several conformations"""
    _check_kind(params, NetKind.ENERGY)
    batch, coords = pack(params, graphs, confs)
    return energy_tensor(params.tensors(), params.config, batch, Tensor(coords)).data.reshape(-1).copy()


def energy(params: ModelParams, g: MolGraph, c: Conformation | Array) -> float:
    """J_phi(c) of one conformation"""
    return float(energies(params, [g], [c])[0])


def energy_grads(
    params: ModelParams,
    graphs: Sequence[MolGraph],
    confs: Sequence[Conformation | Array],
) -> tuple[Array, list[Array]]:
    """Energies and coordinate gradients of several conformations"""
    _check_kind(params, NetKind.ENERGY)
    batch, coords = pack(params, graphs, confs)
    weights = params.tensors()
    with Tape() as tape:
        x = Tensor(coords, requires_grad=True)
        per_mol = energy_tensor(weights, params.config, batch, x)
        total = ops.sum_all(per_mol)
    (dx,) = grad(total, [x], tape)
    return per_mol.data.reshape(-1).copy(), [block.copy() for block in batch.split(dx.data)]


def energy_grad(params: ModelParams, g: MolGraph, c: Conformation | Array) -> Array:
    """Gradient of J_phi with respect to the coordinates, n x 3"""
    return energy_grads(params, [g], [c])[1][0]
