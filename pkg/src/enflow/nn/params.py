"""Learnable tensors of one network instance"""

import hashlib
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from enflow.autodiff import Tensor
from enflow.errors import ModelError
from enflow.nn.config import NetConfig, NetKind

Array = NDArray[np.float64]


def parameter_shapes(config: NetConfig) -> dict[str, tuple[int, ...]]:
    """Name and shape of every parameter, in a fixed order"""
    h = config.hidden
    k = config.featurizer.edge_dim
    shapes: dict[str, tuple[int, ...]] = {
        "embed": (config.n_atom_types, h),
        "input.w": (h + config.time_dim, h),
        "input.b": (h,),
    }
    for layer in range(config.n_layers):
        prefix = f"layer{layer}"
        shapes[f"{prefix}.msg1.w"] = (2 * h + k, h)
        shapes[f"{prefix}.msg1.b"] = (h,)
        shapes[f"{prefix}.msg2.w"] = (h, h)
        shapes[f"{prefix}.msg2.b"] = (h,)
        shapes[f"{prefix}.upd.w"] = (2 * h, h)
        shapes[f"{prefix}.upd.b"] = (h,)
        if config.kind == NetKind.VECTOR:
            shapes[f"{prefix}.gate.w"] = (h, 1)
            shapes[f"{prefix}.gate.b"] = (1,)
    if config.kind == NetKind.ENERGY:
        shapes["readout.w"] = (h, 1)
    return shapes


def _is_head(name: str) -> bool:
    return ".gate." in name or name.startswith("readout.")


@dataclass
class ModelParams:
    """Named float64 arrays plus the configuration that shapes them"""

    config: NetConfig
    arrays: dict[str, Array] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = parameter_shapes(self.config)
        if set(expected) != set(self.arrays):
            missing = sorted(set(expected) - set(self.arrays))
            extra = sorted(set(self.arrays) - set(expected))
            raise ModelError(f"Parameter names do not match: missing {missing}, extra {extra}")
        for name, shape in expected.items():
            arr = np.asarray(self.arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise ModelError(f"Parameter '{name}' has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"Parameter '{name}' has non-finite entries")
            self.arrays[name] = arr

    @classmethod
    def init(cls, config: NetConfig, seed: int, zero_heads: bool = True) -> "ModelParams":
        """
        Uniform initialization in +-1/sqrt(fan_in).

        Args:
            config: Network shape
            seed: Seed of the generator
            zero_heads: Zero the vector gates and the energy readout so the
                untrained model outputs a zero field and a zero energy
        """
        config.check()
        rng = np.random.default_rng(seed)
        arrays: dict[str, Array] = {}
        shapes = parameter_shapes(config)
        for name, shape in shapes.items():
            fan_in = shapes[name[:-2] + ".w"][0] if name.endswith(".b") else shape[0]
            bound = 1.0 / np.sqrt(max(fan_in, 1))
            values = rng.uniform(-bound, bound, size=shape)
            if zero_heads and _is_head(name):
                values = np.zeros(shape)
            arrays[name] = values
        return cls(config=config, arrays=arrays)

    @property
    def kind(self) -> NetKind:
        """Head exposed by this instance"""
        return self.config.kind

    def names(self) -> list[str]:
        """Parameter names in canonical order"""
        return list(parameter_shapes(self.config))

    def __iter__(self) -> Iterator[tuple[str, Array]]:
        for name in self.names():
            yield name, self.arrays[name]

    def __len__(self) -> int:
        return len(self.arrays)

    def n_values(self) -> int:
        """Total number of scalars"""
        return int(sum(a.size for a in self.arrays.values()))

    def copy(self) -> "ModelParams":
        """Deep copy"""
        return ModelParams(
            config=self.config, arrays={k: v.copy() for k, v in self.arrays.items()}
        )

    def tensors(self, requires_grad: bool = False) -> dict[str, Tensor]:
        """Fresh tensors over copies of the arrays"""
        return {
            name: Tensor(arr, requires_grad=requires_grad, name=name)
            for name, arr in self
        }

    def updated(self, deltas: Mapping[str, Array]) -> "ModelParams":
        """Copy with deltas added to the named arrays"""
        result = self.copy()
        for name, delta in deltas.items():
            result.arrays[name] = result.arrays[name] + delta
        return result

    def checksum(self) -> str:
        """sha256 over names, shapes and raw bytes"""
        digest = hashlib.sha256()
        for name, arr in self:
            digest.update(name.encode("utf-8"))
            digest.update(str(arr.shape).encode("utf-8"))
            digest.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return digest.hexdigest()
