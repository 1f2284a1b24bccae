"""JSON-lines persistence for datasets, generated ensembles and predictions"""

import hashlib
import json
import logging
from collections.abc import Mapping, Sequence
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, cast

from enflow.errors import DatasetFormatError, EnflowError
from enflow.models.conformation import Conformation
from enflow.models.ensemble import ConformerEnsemble
from enflow.models.keys import SerializationKeys
from enflow.utils.move import atomic_write_text

HASH_BUCKETS: int = 2**32


class Split(str, Enum):
    """Partition a molecule is assigned to"""

    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class DatasetSplit(NamedTuple):
    """Molecules of each partition, in file order"""

    train: list[ConformerEnsemble]
    valid: list[ConformerEnsemble]
    test: list[ConformerEnsemble]


class Prediction(NamedTuple):
    """Certified ground state of one molecule"""

    mol_id: str
    conformation: Conformation
    predicted_energy: float
    mode: str
    ensemble_size: int


class DatasetDAO:
    """
    Reads and writes molecule ensembles as JSON-lines, one molecule per line:

        {"mol_id": ..., "atom_types": [...], "bonds": [[i, j], ...],
         "conformers": [{"coords": [[x, y, z], ...], "energy": e}, ...],
         "gen_meta": {...}}

    "energy" and "gen_meta" are optional. Conformers are centered on load.
    """

    @staticmethod
    def save(
        ensembles: Sequence[ConformerEnsemble],
        filepath: Path,
        gen_meta: Mapping[str, Any] | None = None,
    ) -> None:
        """
        Write the ensembles atomically.

        Args:
            ensembles: Molecules in output order
            filepath: Destination file
            gen_meta: Sampler settings attached to every record
        """
        logger = logging.getLogger("DatasetDAO")
        lines: list[str] = []
        for ens in ensembles:
            record = ens.to_dict()
            if gen_meta is not None:
                record[SerializationKeys.GEN_META.value] = dict(gen_meta)
            lines.append(json.dumps(record, separators=(",", ":")))
        atomic_write_text("".join(line + "\n" for line in lines), filepath)
        logger.debug("Saved %d molecules to %s", len(lines), filepath)

    @staticmethod
    def _records(filepath: Path) -> list[dict[str, Any]]:
        if not filepath.exists():
            raise FileNotFoundError(f"Dataset file not found: {filepath}")
        records: list[dict[str, Any]] = []
        with open(filepath, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetFormatError(f"{filepath}:{lineno}: {e.msg}") from e
                if not isinstance(record, dict):
                    raise DatasetFormatError(f"{filepath}:{lineno}: record is not an object")
                records.append(cast(dict[str, Any], record))
        return records

    @staticmethod
    def load(filepath: Path, max_conformers: int | None = None) -> list[ConformerEnsemble]:
        """
        Read every molecule of a JSON-lines file.

        Args:
            filepath: Source file
            max_conformers: Keep only the top-K conformers by Boltzmann weight
                of molecules that carry energies

        Raises:
            FileNotFoundError: the file does not exist
            DatasetFormatError: a line is not a valid molecule record
        """
        logger = logging.getLogger("DatasetDAO")
        ensembles: list[ConformerEnsemble] = []
        for index, record in enumerate(DatasetDAO._records(filepath)):
            try:
                ens = ConformerEnsemble.from_dict(record)
            except (KeyError, TypeError, IndexError, EnflowError, ValueError) as e:
                raise DatasetFormatError(f"{filepath}: record {index + 1} is invalid: {e}") from e
            if max_conformers is not None and ens.energies is not None and len(ens) > max_conformers:
                ens = ens.top_k(max_conformers)
            ensembles.append(ens)
        logger.debug("Loaded %d molecules from %s", len(ensembles), filepath)
        return ensembles

    @staticmethod
    def load_gen_meta(filepath: Path) -> dict[str, Any]:
        """Sampler settings stored with the first record, empty when absent"""
        records = DatasetDAO._records(filepath)
        if not records:
            return {}
        return dict(records[0].get(SerializationKeys.GEN_META.value, {}))

    @staticmethod
    def split_of(mol_id: str, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)) -> Split:
        """Partition of a molecule from the sha256 of its mol_id"""
        digest = hashlib.sha256(mol_id.encode("utf-8")).digest()
        position = int.from_bytes(digest[:4], "big") / HASH_BUCKETS
        total = sum(fractions)
        if position < fractions[0] / total:
            return Split.TRAIN
        if position < (fractions[0] + fractions[1]) / total:
            return Split.VALID
        return Split.TEST

    @staticmethod
    def split(
        ensembles: Sequence[ConformerEnsemble],
        fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    ) -> DatasetSplit:
        """Deterministic partition by mol_id hash; file order is kept inside each part"""
        parts: dict[Split, list[ConformerEnsemble]] = {s: [] for s in Split}
        for ens in ensembles:
            parts[DatasetDAO.split_of(ens.mol_id, fractions)].append(ens)
        return DatasetSplit(parts[Split.TRAIN], parts[Split.VALID], parts[Split.TEST])

    @staticmethod
    def save_predictions(predictions: Sequence[Prediction], filepath: Path) -> None:
        """One certified conformation per line"""
        keys = SerializationKeys
        lines = [
            json.dumps(
                {
                    keys.MOL_ID.value: p.mol_id,
                    keys.COORDS.value: p.conformation.to_list(),
                    keys.PREDICTED_ENERGY.value: p.predicted_energy,
                    keys.MODE.value: p.mode,
                    keys.ENSEMBLE_SIZE.value: p.ensemble_size,
                },
                separators=(",", ":"),
            )
            for p in predictions
        ]
        atomic_write_text("".join(line + "\n" for line in lines), filepath)

    @staticmethod
    def load_predictions(filepath: Path) -> dict[str, Prediction]:
        """
        Predictions keyed by mol_id.

        Raises:
            FileNotFoundError: the file does not exist
            DatasetFormatError: a line is not a valid prediction record
        """
        keys = SerializationKeys
        result: dict[str, Prediction] = {}
        for index, record in enumerate(DatasetDAO._records(filepath)):
            try:
                prediction = Prediction(
                    mol_id=str(record[keys.MOL_ID.value]),
                    conformation=Conformation.from_array(record[keys.COORDS.value]),
                    predicted_energy=float(record[keys.PREDICTED_ENERGY.value]),
                    mode=str(record[keys.MODE.value]),
                    ensemble_size=int(record[keys.ENSEMBLE_SIZE.value]),
                )
            except (KeyError, TypeError, EnflowError, ValueError) as e:
                raise DatasetFormatError(
                    f"{filepath}: prediction {index + 1} is invalid: {e}"
                ) from e
            result[prediction.mol_id] = prediction
        return result
