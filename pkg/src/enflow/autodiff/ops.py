"""
Differentiable primitives.

Every primitive checks shapes, computes its output with numpy and records a
vector-Jacobian product on the active tape. Broadcasting is limited to
expanding a row vector along the leading dimension (`broadcast_rows`).
"""

import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from enflow.autodiff.tape import VJP, Array, Tensor, active_tape
from enflow.errors import ShapeError

Index = NDArray[np.int64]
LN2: float = math.log(2.0)


def _emit(op: str, inputs: tuple[Tensor, ...], data: Array, vjp: VJP) -> Tensor:
    out = Tensor.wrap(data)
    tape = active_tape()
    if tape is not None:
        tape.record(op, inputs, out, vjp)
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _as_index(idx: Sequence[int] | NDArray[np.int64]) -> Index:
    return np.asarray(idx, dtype=np.int64).reshape(-1)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum"""
    _same_shape("add", a, b)
    return _emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise difference"""
    _same_shape("sub", a, b)
    return _emit("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product"""
    _same_shape("mul", a, b)
    return _emit("mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data))


def div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient"""
    _same_shape("div", a, b)
    out = a.data / b.data
    return _emit("div", (a, b), out, lambda g: (g / b.data, -g * out / b.data))


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a constant"""
    return _emit("scale", (a,), a.data * factor, lambda g: (g * factor,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors"""
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _emit(
        "matmul", (a, b), a.data @ b.data, lambda g: (g @ b.data.T, a.data.T @ g)
    )


def sum_all(a: Tensor) -> Tensor:
    """Sum of every entry, as a scalar"""
    return _emit(
        "sum", (a,), np.asarray(a.data.sum()), lambda g: (np.full(a.shape, float(g)),)
    )


def mean(a: Tensor) -> Tensor:
    """Mean of every entry, as a scalar"""
    if a.size == 0:
        raise ShapeError("mean: empty tensor")
    n = a.size
    return _emit(
        "mean",
        (a,),
        np.asarray(a.data.sum() / n),
        lambda g: (np.full(a.shape, float(g) / n),),
    )


def broadcast_rows(a: Tensor, n_rows: int) -> Tensor:
    """Repeat a (k,) or (1, k) tensor into n_rows x k"""
    if len(a.shape) == 1:
        row = a.data.reshape(1, -1)
    elif len(a.shape) == 2 and a.shape[0] == 1:
        row = a.data
    else:
        raise ShapeError(f"broadcast_rows: expected a row vector, got {a.shape}")
    out = np.repeat(row, n_rows, axis=0)
    return _emit(
        "broadcast", (a,), out, lambda g: (g.sum(axis=0).reshape(a.shape),)
    )


def concat(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate 2-D tensors along an axis"""
    if not parts:
        raise ShapeError("concat: nothing to concatenate")
    other = 1 - axis
    for p in parts:
        if len(p.shape) != 2 or p.shape[other] != parts[0].shape[other]:
            raise ShapeError(
                f"concat: incompatible shapes {[q.shape for q in parts]} on axis {axis}"
            )
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g: Array) -> list[Array | None]:
        return list(np.split(g, splits, axis=axis))

    return _emit(
        "concat", tuple(parts), np.concatenate([p.data for p in parts], axis=axis), vjp
    )


def gather_rows(a: Tensor, idx: Sequence[int] | Index) -> Tensor:
    """Rows a[idx]"""
    index = _as_index(idx)
    if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise ShapeError(f"gather_rows: index out of range for {a.shape[0]} rows")

    def vjp(g: Array) -> tuple[Array]:
        out = np.zeros(a.shape)
        np.add.at(out, index, g)
        return (out,)

    return _emit("gather_rows", (a,), a.data[index], vjp)


def scatter_add_rows(a: Tensor, idx: Sequence[int] | Index, n_rows: int) -> Tensor:
    """out[idx[k]] += a[k], with n_rows output rows"""
    index = _as_index(idx)
    if index.size != a.shape[0]:
        raise ShapeError(f"scatter_add_rows: {index.size} indices for {a.shape[0]} rows")
    if index.size and (index.min() < 0 or index.max() >= n_rows):
        raise ShapeError(f"scatter_add_rows: index out of range for {n_rows} rows")
    out = np.zeros((n_rows, *a.shape[1:]))
    np.add.at(out, index, a.data)
    return _emit("scatter_add_rows", (a,), out, lambda g: (g[index],))


def pairwise_diff(a: Tensor, src: Sequence[int] | Index, dst: Sequence[int] | Index) -> Tensor:
    """Row differences a[src] - a[dst]"""
    s, d = _as_index(src), _as_index(dst)
    if s.size != d.size:
        raise ShapeError("pairwise_diff: src and dst lengths differ")
    if s.size and (max(s.max(), d.max()) >= a.shape[0] or min(s.min(), d.min()) < 0):
        raise ShapeError(f"pairwise_diff: index out of range for {a.shape[0]} rows")

    def vjp(g: Array) -> tuple[Array]:
        out = np.zeros(a.shape)
        np.add.at(out, s, g)
        np.add.at(out, d, -g)
        return (out,)

    return _emit("pairwise_diff", (a,), a.data[s] - a.data[d], vjp)


def shifted_softplus(a: Tensor) -> Tensor:
    """log(1 + e^x) - log 2, a smooth activation that is zero at the origin"""
    out = np.logaddexp(0.0, a.data) - LN2
    # numerically stable logistic
    slope = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _emit("shifted_softplus", (a,), out, lambda g: (g * slope,))


def exp(a: Tensor) -> Tensor:
    """Elementwise exponential"""
    out = np.exp(a.data)
    return _emit("exp", (a,), out, lambda g: (g * out,))


def sqrt(a: Tensor) -> Tensor:
    """Elementwise square root"""
    out = np.sqrt(a.data)
    return _emit("sqrt", (a,), out, lambda g: (0.5 * g / out,))


def square(a: Tensor) -> Tensor:
    """Elementwise square"""
    return _emit("square", (a,), a.data * a.data, lambda g: (2.0 * g * a.data,))


def cos(a: Tensor) -> Tensor:
    """Elementwise cosine"""
    return _emit("cos", (a,), np.cos(a.data), lambda g: (-g * np.sin(a.data),))


def absolute(a: Tensor) -> Tensor:
    """Elementwise absolute value, subgradient 0 at 0"""
    return _emit("abs", (a,), np.abs(a.data), lambda g: (g * np.sign(a.data),))


def norm_rows(a: Tensor, eps: float) -> Tensor:
    """Row norms clamped from below: max(||a_i||, eps), shape n x 1"""
    if len(a.shape) != 2:
        raise ShapeError(f"norm_rows: expected a 2-D tensor, got {a.shape}")
    norms = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))
    active = norms > eps
    safe = np.where(active, norms, 1.0)

    def vjp(g: Array) -> tuple[Array]:
        return (np.where(active, a.data / safe, 0.0) * g,)

    return _emit("norm_rows", (a,), np.maximum(norms, eps), vjp)


def expand_cols(a: Tensor, n_cols: int) -> Tensor:
    """Repeat an n x 1 column into n x n_cols, as a product with a row of ones"""
    if len(a.shape) != 2 or a.shape[1] != 1:
        raise ShapeError(f"expand_cols: expected an n x 1 column, got {a.shape}")
    return matmul(a, Tensor(np.ones((1, n_cols))))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ W (+ b broadcast over rows)"""
    out = matmul(x, weight)
    if bias is None:
        return out
    return add(out, broadcast_rows(bias, x.shape[0]))
