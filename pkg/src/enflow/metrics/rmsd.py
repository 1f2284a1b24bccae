"""RMSD after optimal superposition by a proper rotation and a translation"""

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from enflow.errors import EmptyEnsemble, ShapeError
from enflow.models import Conformation

Array = NDArray[np.float64]


def kabsch_rotation(a: Array, b: Array) -> Array:
    """Proper rotation R minimizing sum ||a_i - R b_i||^2 for centered a, b"""
    h = b.T @ a
    u, _, vt = np.linalg.svd(h)
    d = 1.0 if np.linalg.det(vt.T @ u.T) >= 0 else -1.0
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


def kabsch_align(a: Conformation, b: Conformation) -> Array:
    """Coordinates of b superposed onto a"""
    if a.n_atoms != b.n_atoms:
        raise ShapeError(f"Cannot align {a.n_atoms} atoms onto {b.n_atoms} atoms")
    a_mean = a.coords.mean(axis=0)
    ac = a.coords - a_mean
    bc = b.coords - b.coords.mean(axis=0)
    return bc @ kabsch_rotation(ac, bc).T + a_mean


def kabsch_rmsd(a: Conformation, b: Conformation) -> float:
    """Minimal RMSD between a and any rigid motion of b"""
    diff = a.coords - kabsch_align(a, b)
    return float(np.sqrt(np.sum(diff * diff) / a.n_atoms))


def rmsd_matrix(
    refs: Sequence[Conformation], gens: Sequence[Conformation], workers: int = 1
) -> Array:
    """|refs| x |gens| matrix of aligned RMSDs"""
    if not refs or not gens:
        raise EmptyEnsemble("RMSD matrix of an empty set")

    def row(r: Conformation) -> list[float]:
        return [kabsch_rmsd(r, g) for g in gens]

    if workers <= 1:
        rows = [row(r) for r in refs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, refs))
    return np.asarray(rows, dtype=np.float64)
