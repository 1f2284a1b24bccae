"""Represents the 2D bonding graph of a molecule"""

from collections import deque
from dataclasses import dataclass, field
from typing import Any, cast, override

import numpy as np
from numpy.typing import NDArray

from enflow.errors import DisconnectedGraph, ShapeError
from enflow.models.keys import SerializationKeys


@dataclass(frozen=True)
class MolGraph:
    """Atom types plus an undirected bond list, with 0-based atom indices"""

    atom_types: tuple[int, ...]
    bonds: tuple[tuple[int, int], ...] = ()
    mol_id: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if len(self.atom_types) == 0:
            raise ShapeError("A molecule needs at least one atom")
        if any(code < 0 for code in self.atom_types):
            raise ShapeError(f"Negative atom type in {self.atom_types}")

        normalized: list[tuple[int, int]] = []
        seen: set[tuple[int, int]] = set()
        for i, j in self.bonds:
            if i == j:
                raise ShapeError(f"Self-bond on atom {i}")
            pair = (min(i, j), max(i, j))
            if pair[0] < 0 or pair[1] >= self.n_atoms:
                raise ShapeError(f"Bond {pair} out of range for {self.n_atoms} atoms")
            if pair in seen:
                raise ShapeError(f"Duplicate bond {pair}")
            seen.add(pair)
            normalized.append(pair)

        object.__setattr__(self, "atom_types", tuple(int(a) for a in self.atom_types))
        object.__setattr__(self, "bonds", tuple(normalized))

    @property
    def n_atoms(self) -> int:
        """Number of atoms"""
        return len(self.atom_types)

    def adjacency(self) -> NDArray[np.float64]:
        """Dense symmetric 0/1 adjacency matrix"""
        adj = np.zeros((self.n_atoms, self.n_atoms), dtype=np.float64)
        for i, j in self.bonds:
            adj[i, j] = 1.0
            adj[j, i] = 1.0
        return adj

    def neighbors(self) -> list[list[int]]:
        """Neighbor lists, sorted by index"""
        result: list[list[int]] = [[] for _ in range(self.n_atoms)]
        for i, j in self.bonds:
            result[i].append(j)
            result[j].append(i)
        return [sorted(n) for n in result]

    def hop_distances(self) -> NDArray[np.int64]:
        """All-pairs shortest path lengths in bonds, -1 when unreachable"""
        neighbors = self.neighbors()
        dist = np.full((self.n_atoms, self.n_atoms), -1, dtype=np.int64)
        for source in range(self.n_atoms):
            dist[source, source] = 0
            queue = deque([source])
            while queue:
                node = queue.popleft()
                for nxt in neighbors[node]:
                    if dist[source, nxt] < 0:
                        dist[source, nxt] = dist[source, node] + 1
                        queue.append(nxt)
        return dist

    def is_connected(self) -> bool:
        """True when every atom is reachable from atom 0"""
        return bool(np.all(self.hop_distances()[0] >= 0))

    def laplacian(self) -> NDArray[np.float64]:
        """Graph Laplacian L = D - A of a connected graph"""
        if not self.is_connected():
            raise DisconnectedGraph(
                f"Molecule '{self.mol_id}' with {self.n_atoms} atoms is not connected"
            )
        adj = self.adjacency()
        return np.diag(adj.sum(axis=1)) - adj

    @override
    def __str__(self) -> str:
        return f"MolGraph(id={self.mol_id}; atoms={self.n_atoms}; bonds={len(self.bonds)})"

    def to_dict(self) -> dict[str, Any]:
        """Serialize to the JSON-lines record fields"""
        return {
            SerializationKeys.MOL_ID.value: self.mol_id,
            SerializationKeys.ATOM_TYPES.value: list(self.atom_types),
            SerializationKeys.BONDS.value: [list(b) for b in self.bonds],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MolGraph":
        """Build the graph from a JSON-lines record"""
        bonds = cast(list[list[int]], data.get(SerializationKeys.BONDS.value, []))
        return cls(
            atom_types=tuple(
                int(a) for a in cast(list[int], data[SerializationKeys.ATOM_TYPES.value])
            ),
            bonds=tuple((int(b[0]), int(b[1])) for b in bonds),
            mol_id=str(data.get(SerializationKeys.MOL_ID.value, "")),
        )


def laplacian(graph: MolGraph) -> NDArray[np.float64]:
    """Graph Laplacian of a connected molecule"""
    return graph.laplacian()
