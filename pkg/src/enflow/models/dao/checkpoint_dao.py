"""Binary persistence of trained network parameters"""

import logging
import struct
from pathlib import Path
from typing import Any, NamedTuple, cast

import msgpack
import numpy as np
import zstd
from pydantic import ValidationError

from enflow.errors import CheckpointError, ModelError
from enflow.models.keys import SerializationKeys
from enflow.nn.config import NetConfig
from enflow.nn.params import ModelParams
from enflow.utils.move import atomic_write_bytes


class Checkpoint(NamedTuple):
    """Vector-field and energy parameters with free-form metadata"""

    theta: ModelParams
    phi: ModelParams
    meta: dict[str, Any]


class CheckpointDAO:
    """
    Handles reading/writing checkpoint files.

    File format:
    - enflow-ckpt-v1 (magic, 14 bytes)
    - Version (2 bytes, little-endian)
    - ZSTD-compressed msgpack map:
        theta / phi: {config: NetConfig as JSON, tensors: {name: {shape, data}}}
        meta: str -> scalar map

    Tensor data is the raw little-endian float64 buffer, so a save/load round
    trip is bit-exact.
    """

    MAGIC: bytes = b"enflow-ckpt-v1"
    VERSION: int = 1
    HEADER_SIZE: int = 14 + 2  # magic + version

    @staticmethod
    def save(checkpoint: Checkpoint, filepath: Path) -> None:
        """Encode, compress and write the checkpoint atomically"""
        logger = logging.getLogger("CheckpointDAO")
        keys = SerializationKeys
        payload = {
            keys.THETA.value: CheckpointDAO._encode_params(checkpoint.theta),
            keys.PHI.value: CheckpointDAO._encode_params(checkpoint.phi),
            keys.META.value: dict(checkpoint.meta),
        }
        packed = cast(bytes, msgpack.packb(payload, use_bin_type=True))
        compressed = zstd.ZSTD_compress(packed, 3)
        header = CheckpointDAO.MAGIC + struct.pack("<H", CheckpointDAO.VERSION)
        atomic_write_bytes(header + compressed, filepath)
        logger.debug("Checkpoint saved: %d bytes to %s", len(header) + len(compressed), filepath)

    @staticmethod
    def load(filepath: Path) -> Checkpoint:
        """
        Read a checkpoint written by save.

        Raises:
            FileNotFoundError: the file does not exist
            CheckpointError: wrong magic, unknown version or corrupt payload
        """
        logger = logging.getLogger("CheckpointDAO")
        if not filepath.exists():
            raise FileNotFoundError(f"Checkpoint not found: {filepath}")
        with open(filepath, "rb") as f:
            data = f.read()

        if len(data) < CheckpointDAO.HEADER_SIZE or not data.startswith(CheckpointDAO.MAGIC):
            raise CheckpointError(f"{filepath} is not an enflow checkpoint")
        magic_len = len(CheckpointDAO.MAGIC)
        (version,) = struct.unpack("<H", data[magic_len : CheckpointDAO.HEADER_SIZE])
        if version != CheckpointDAO.VERSION:
            raise CheckpointError(
                f"Unsupported checkpoint version {version}, expected {CheckpointDAO.VERSION}"
            )

        keys = SerializationKeys
        try:
            payload = msgpack.unpackb(zstd.decompress(data[CheckpointDAO.HEADER_SIZE :]), raw=False)
            theta = CheckpointDAO._decode_params(payload[keys.THETA.value])
            phi = CheckpointDAO._decode_params(payload[keys.PHI.value])
            meta = dict(payload.get(keys.META.value, {}))
        except CheckpointError:
            raise
        except Exception as e:  # pylint: disable=broad-exception-caught
            raise CheckpointError(f"Corrupt checkpoint payload in {filepath}: {e}") from e

        logger.debug("Checkpoint loaded: %d + %d tensors", len(theta), len(phi))
        return Checkpoint(theta=theta, phi=phi, meta=meta)

    @staticmethod
    def _encode_params(params: ModelParams) -> dict[str, Any]:
        keys = SerializationKeys
        tensors = {
            name: {
                keys.SHAPE.value: list(arr.shape),
                keys.DATA.value: np.ascontiguousarray(arr, dtype="<f8").tobytes(),
            }
            for name, arr in params
        }
        return {
            keys.CONFIG.value: params.config.model_dump_json(),
            keys.TENSORS.value: tensors,
        }

    @staticmethod
    def _decode_params(entry: dict[str, Any]) -> ModelParams:
        keys = SerializationKeys
        try:
            config = NetConfig.model_validate_json(entry[keys.CONFIG.value])
        except ValidationError as e:
            raise CheckpointError(f"Invalid network configuration: {e}") from e
        arrays: dict[str, np.ndarray] = {}
        for name, tensor in cast(dict[str, dict[str, Any]], entry[keys.TENSORS.value]).items():
            shape = tuple(int(s) for s in tensor[keys.SHAPE.value])
            raw = cast(bytes, tensor[keys.DATA.value])
            arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        try:
            return ModelParams(config=config, arrays=arrays)
        except ModelError as e:
            raise CheckpointError(f"Checkpoint tensors do not match their configuration: {e}") from e
