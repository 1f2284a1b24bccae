"""
Tensors and the recording tape of the reverse-mode differentiation engine.

A Tape records every primitive whose inputs depend on a tensor created with
requires_grad=True while the tape is active (inside its `with` block).
After the block exits the tape is frozen and can be differentiated any
number of times; gradients are accumulated in reverse recording order,
which is a topological order because inputs always exist before outputs.
"""

import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from types import TracebackType
from typing import Self, override

import numpy as np
from numpy.typing import ArrayLike, NDArray

from enflow.errors import NonScalarLoss

Array = NDArray[np.float64]
VJP = Callable[[Array], Sequence[Array | None]]


class Tensor:
    """Dense float64 array, optionally a differentiation leaf"""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(
        self, data: ArrayLike, requires_grad: bool = False, name: str | None = None
    ):
        self.data: Array = np.array(data, dtype=np.float64)
        self.requires_grad: bool = requires_grad
        self.name: str | None = name

    @classmethod
    def wrap(cls, data: Array) -> "Tensor":
        """Wrap an array produced by a primitive without copying it"""
        tensor = cls.__new__(cls)
        tensor.data = data
        tensor.requires_grad = False
        tensor.name = None
        return tensor

    @property
    def shape(self) -> tuple[int, ...]:
        """Dimensions of the tensor"""
        return tuple(int(d) for d in self.data.shape)

    @property
    def size(self) -> int:
        """Number of entries"""
        return int(self.data.size)

    def numpy(self) -> Array:
        """Copy of the data"""
        return self.data.copy()

    def item(self) -> float:
        """Value of a single-entry tensor"""
        return float(self.data.reshape(-1)[0])

    def __add__(self, other: "Tensor") -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        return ops.sub(self, other)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    def __rmul__(self, other: float) -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        return ops.scale(self, float(other))

    def __truediv__(self, other: "Tensor | float") -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        if isinstance(other, Tensor):
            return ops.div(self, other)
        return ops.scale(self, 1.0 / float(other))

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        return ops.matmul(self, other)

    def __neg__(self) -> "Tensor":
        from enflow.autodiff import ops  # pylint: disable=import-outside-toplevel

        return ops.scale(self, -1.0)

    @override
    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass(frozen=True)
class Node:
    """One recorded primitive"""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: VJP


_local = threading.local()


def active_tape() -> "Tape | None":
    """Innermost tape active on this thread, if any"""
    stack: list[Tape] = getattr(_local, "stack", [])
    return stack[-1] if stack else None


class Tape:
    """Ordered record of primitives, single-threaded and single-use"""

    def __init__(self) -> None:
        self._nodes: list[Node] = []
        self._tracked: set[int] = set()
        self._frozen: bool = False

    def __enter__(self) -> Self:
        if self._frozen:
            raise RuntimeError("A tape records a single forward pass")
        stack: list[Tape] = getattr(_local, "stack", [])
        stack.append(self)
        _local.stack = stack
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_value: BaseException | None,
        traceback: TracebackType | None,
    ) -> None:
        stack: list[Tape] = getattr(_local, "stack", [])
        if stack and stack[-1] is self:
            _ = stack.pop()
        self._frozen = True

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def ops(self) -> list[str]:
        """Names of the recorded primitives, in order"""
        return [node.op for node in self._nodes]

    def is_tracked(self, tensor: Tensor) -> bool:
        """True for leaves requiring grad and for outputs recorded on this tape"""
        return tensor.requires_grad or id(tensor) in self._tracked

    def record(
        self, op: str, inputs: tuple[Tensor, ...], output: Tensor, vjp: VJP
    ) -> None:
        """Append a primitive when any of its inputs is tracked"""
        if self._frozen or not any(self.is_tracked(t) for t in inputs):
            return
        self._nodes.append(Node(op, inputs, output, vjp))
        self._tracked.add(id(output))

    def gradient(self, output: Tensor, wrt: Sequence[Tensor]) -> list[Tensor]:
        """
        Vector-Jacobian products of a scalar output.

        Args:
            output: Scalar tensor produced on this tape
            wrt: Tensors to differentiate against

        Returns:
            One gradient per entry of wrt, zeros where wrt is unreachable
        """
        if output.size != 1:
            raise NonScalarLoss(f"Gradient of a tensor with shape {output.shape}")

        adjoints: dict[int, Array] = {id(output): np.ones_like(output.data)}
        for node in reversed(self._nodes):
            upstream = adjoints.get(id(node.output))
            if upstream is None:
                continue
            for tensor, local in zip(node.inputs, node.vjp(upstream), strict=True):
                if local is None or not self.is_tracked(tensor):
                    continue
                key = id(tensor)
                adjoints[key] = adjoints[key] + local if key in adjoints else local

        result: list[Tensor] = []
        for tensor in wrt:
            adjoint = adjoints.get(id(tensor))
            if adjoint is None:
                result.append(Tensor(np.zeros(tensor.shape)))
            else:
                result.append(Tensor(np.reshape(adjoint, tensor.shape)))
        return result


def grad(output: Tensor, wrt: Sequence[Tensor], tape: Tape | None = None) -> list[Tensor]:
    """Gradient of a scalar output, using the given or the innermost active tape"""
    tape = tape if tape is not None else active_tape()
    if tape is None:
        if output.size != 1:
            raise NonScalarLoss(f"Gradient of a tensor with shape {output.shape}")
        return [Tensor(np.zeros(t.shape)) for t in wrt]
    return tape.gradient(output, wrt)
