"""Represents the 3D coordinates of a molecule"""

from dataclasses import dataclass
from typing import Any, override

import numpy as np
from numpy.typing import ArrayLike, NDArray

from enflow.errors import InvalidConformation
from enflow.models.keys import SerializationKeys


@dataclass(frozen=True, eq=False)
class Conformation:
    """n x 3 coordinates; the stored array is a read-only copy"""

    coords: NDArray[np.float64]

    def __post_init__(self) -> None:
        try:
            arr = np.array(self.coords, dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise InvalidConformation(f"Coordinates are not numeric: {e}") from e
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
            raise InvalidConformation(f"Expected an n x 3 matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidConformation("Coordinates contain non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_array(cls, coords: ArrayLike) -> "Conformation":
        """Build from anything numpy can turn into an n x 3 array"""
        return cls(np.asarray(coords, dtype=np.float64))

    @property
    def n_atoms(self) -> int:
        """Number of atoms"""
        return int(self.coords.shape[0])

    def center(self) -> "Conformation":
        """Return a copy with the column means subtracted"""
        return Conformation(self.coords - self.coords.mean(axis=0))

    def distance_matrix(self) -> NDArray[np.float64]:
        """Full pairwise Euclidean distance matrix, zeros on the diagonal"""
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def to_list(self) -> list[list[float]]:
        """Coordinates as nested lists of floats"""
        return [[float(x) for x in row] for row in self.coords]

    @override
    def __eq__(self, other: object, /) -> bool:
        if not isinstance(other, Conformation):
            return NotImplemented
        return bool(np.array_equal(self.coords, other.coords))

    @override
    def __hash__(self) -> int:
        return hash(self.coords.tobytes())

    @override
    def __repr__(self) -> str:
        return f"Conformation(n_atoms={self.n_atoms})"

    def to_dict(self) -> dict[str, Any]:
        """Serialize to {"coords": [[x, y, z], ...]}"""
        return {SerializationKeys.COORDS.value: self.to_list()}


def center(conformation: Conformation) -> Conformation:
    """Move the center of mass to the origin"""
    return conformation.center()
