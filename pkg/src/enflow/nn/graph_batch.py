"""Several molecules packed into one disjoint graph"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from enflow.errors import ModelError
from enflow.models import MolGraph

IntArray = NDArray[np.int64]


@dataclass(frozen=True)
class GraphBatch:
    """
    Node and edge index arrays of a batch of molecules.

    Edges are all ordered pairs (i, j), i != j, of atoms of the same molecule;
    `recv` is the atom that aggregates the message and `send` its partner.
    `bonded` is 1.0 for edges along a bond and 0.0 otherwise.
    """

    atom_types: IntArray
    recv: IntArray
    send: IntArray
    bonded: NDArray[np.float64]
    node_mol: IntArray
    counts: IntArray
    offsets: IntArray

    @classmethod
    def from_graphs(cls, graphs: Sequence[MolGraph], n_atom_types: int) -> "GraphBatch":
        """Pack graphs in order; atom types must be below n_atom_types"""
        if not graphs:
            raise ModelError("Cannot batch zero molecules")
        types: list[int] = []
        recv: list[int] = []
        send: list[int] = []
        bonded: list[float] = []
        node_mol: list[int] = []
        counts: list[int] = []
        offsets: list[int] = []
        offset = 0
        for index, graph in enumerate(graphs):
            if max(graph.atom_types) >= n_atom_types:
                raise ModelError(
                    f"Atom type {max(graph.atom_types)} of '{graph.mol_id}' "
                    + f"exceeds the {n_atom_types} embedded types"
                )
            n = graph.n_atoms
            bond_set = {(min(i, j), max(i, j)) for i, j in graph.bonds}
            types.extend(graph.atom_types)
            node_mol.extend([index] * n)
            for i in range(n):
                for j in range(n):
                    if i != j:
                        recv.append(offset + i)
                        send.append(offset + j)
                        bonded.append(1.0 if (min(i, j), max(i, j)) in bond_set else 0.0)
            counts.append(n)
            offsets.append(offset)
            offset += n
        return cls(
            atom_types=np.asarray(types, dtype=np.int64),
            recv=np.asarray(recv, dtype=np.int64),
            send=np.asarray(send, dtype=np.int64),
            bonded=np.asarray(bonded, dtype=np.float64).reshape(-1, 1),
            node_mol=np.asarray(node_mol, dtype=np.int64),
            counts=np.asarray(counts, dtype=np.int64),
            offsets=np.asarray(offsets, dtype=np.int64),
        )

    @property
    def n_nodes(self) -> int:
        """Total number of atoms"""
        return int(self.atom_types.size)

    @property
    def n_edges(self) -> int:
        """Total number of directed pairs"""
        return int(self.recv.size)

    @property
    def n_mols(self) -> int:
        """Number of molecules"""
        return int(self.counts.size)

    def split(self, rows: NDArray[np.float64]) -> list[NDArray[np.float64]]:
        """Cut a per-node array back into one block per molecule"""
        return [
            rows[start : start + count]
            for start, count in zip(self.offsets.tolist(), self.counts.tolist(), strict=True)
        ]
