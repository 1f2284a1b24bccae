"""Tests for dataset, prediction and checkpoint files"""

import struct
import tempfile
from pathlib import Path

import msgpack
import numpy as np
import pytest
import zstd

from enflow.errors import CheckpointError, DatasetFormatError
from enflow.models import Conformation, ConformerEnsemble, MolGraph
from enflow.models.dao.checkpoint_dao import Checkpoint, CheckpointDAO
from enflow.models.dao.dataset_dao import DatasetDAO, Prediction, Split
from enflow.nn import ModelParams, NetConfig

SMALL = {"hidden": 5, "n_layers": 2, "n_atom_types": 3, "time_freqs": 2}


def _ensemble(mol_id: str, energies: list[float] | None = None, n_conf: int = 3) -> ConformerEnsemble:
    graph = MolGraph(atom_types=(0, 2, 1), bonds=((0, 1), (1, 2)), mol_id=mol_id)
    rng = np.random.default_rng(len(mol_id))
    confs = [Conformation(rng.normal(size=(3, 3))).center() for _ in range(n_conf)]
    return ConformerEnsemble(graph=graph, conformers=confs, energies=energies)


def _checkpoint() -> Checkpoint:
    theta = ModelParams.init(NetConfig.vector_field(**SMALL), 0, zero_heads=False)
    phi = ModelParams.init(NetConfig.energy_model(**SMALL), 1, zero_heads=False)
    return Checkpoint(theta=theta, phi=phi, meta={"seed": 0, "tag": "drugs"})


class TestDatasetDAO:
    """Tests for the JSON-lines dataset file"""

    def test_save_and_load(self):
        """Graphs, conformers and energies survive a round trip"""
        data = [_ensemble("a", [0.3, -1.2, 2.5]), _ensemble("bb")]
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "dataset.jsonl"
            DatasetDAO.save(data, path)
            loaded = DatasetDAO.load(path)
            assert len(path.read_text().splitlines()) == 2

        assert [e.mol_id for e in loaded] == ["a", "bb"]
        assert loaded[0].graph == data[0].graph
        assert loaded[0].energies == [0.3, -1.2, 2.5]
        assert loaded[1].energies is None
        for original, restored in zip(data[0].conformers, loaded[0].conformers):
            np.testing.assert_allclose(restored.coords, original.coords, atol=1e-12)

    def test_max_conformers(self):
        """Labelled molecules keep their lowest-energy conformers"""
        data = [_ensemble("a", [3.0, 1.0, 2.0]), _ensemble("b", None)]
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "dataset.jsonl"
            DatasetDAO.save(data, path)
            loaded = DatasetDAO.load(path, max_conformers=2)
        assert loaded[0].energies == [1.0, 2.0]
        assert len(loaded[1]) == 3

    def test_gen_meta(self):
        """Sampler settings are stored with the records"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "generated.jsonl"
            DatasetDAO.save([_ensemble("a")], path, gen_meta={"n_steps": 5, "amplitude": 0.2})
            assert DatasetDAO.load_gen_meta(path) == {"n_steps": 5, "amplitude": 0.2}
            DatasetDAO.save([_ensemble("a")], path)
            assert DatasetDAO.load_gen_meta(path) == {}

    def test_missing_file(self):
        """A missing file raises FileNotFoundError"""
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(FileNotFoundError):
                _ = DatasetDAO.load(Path(tmpdir) / "nothing.jsonl")

    def test_bad_lines(self):
        """Malformed JSON and invalid records name the file"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "bad.jsonl"
            _ = path.write_text('{"mol_id": "a"\n')
            with pytest.raises(DatasetFormatError, match="bad.jsonl:1"):
                _ = DatasetDAO.load(path)
            _ = path.write_text('{"mol_id": "a", "atom_types": [0, 0], "bonds": [[0, 5]], "conformers": []}\n')
            with pytest.raises(DatasetFormatError):
                _ = DatasetDAO.load(path)
            _ = path.write_text("[1, 2]\n")
            with pytest.raises(DatasetFormatError):
                _ = DatasetDAO.load(path)

    def test_blank_lines_are_skipped(self):
        """Empty lines between records are ignored"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "dataset.jsonl"
            DatasetDAO.save([_ensemble("a"), _ensemble("b")], path)
            _ = path.write_text(path.read_text().replace("\n", "\n\n"))
            assert len(DatasetDAO.load(path)) == 2


class TestSplit:
    """Tests for the hash-based split"""

    def test_deterministic(self):
        """The same mol_id always lands in the same partition"""
        assert DatasetDAO.split_of("mol-0007") == DatasetDAO.split_of("mol-0007")

    def test_proportions(self):
        """About 80/10/10 over many identifiers"""
        counts = {s: 0 for s in Split}
        for i in range(4000):
            counts[DatasetDAO.split_of(f"mol-{i:04d}")] += 1
        assert 0.77 <= counts[Split.TRAIN] / 4000 <= 0.83
        assert 0.08 <= counts[Split.TEST] / 4000 <= 0.12

    def test_single_partition(self):
        """Fractions (0, 0, 1) send everything to test"""
        data = [_ensemble(f"m{i}") for i in range(10)]
        parts = DatasetDAO.split(data, (0.0, 0.0, 1.0))
        assert parts.train == [] and parts.valid == []
        assert [e.mol_id for e in parts.test] == [f"m{i}" for i in range(10)]

    def test_split_keeps_order(self):
        """Each partition keeps file order and nothing is lost"""
        data = [_ensemble(f"mol-{i:04d}") for i in range(30)]
        parts = DatasetDAO.split(data)
        assert sum(len(p) for p in parts) == 30
        for part in parts:
            ids = [e.mol_id for e in part]
            assert ids == sorted(ids)


class TestPredictions:
    """Tests for the predictions file"""

    def test_roundtrip(self):
        """Predictions come back keyed by mol_id"""
        conf = Conformation.from_array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        preds = [Prediction("a", conf, -0.25, "ensemblecert", 20), Prediction("b", conf, 1.5, "justfm", 1)]
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "predictions.jsonl"
            DatasetDAO.save_predictions(preds, path)
            loaded = DatasetDAO.load_predictions(path)
        assert set(loaded) == {"a", "b"}
        assert loaded["a"].conformation == conf
        assert loaded["a"].predicted_energy == -0.25
        assert loaded["b"].mode == "justfm"
        assert loaded["b"].ensemble_size == 1

    def test_invalid_record(self):
        """A record without coordinates raises DatasetFormatError"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "predictions.jsonl"
            _ = path.write_text('{"mol_id": "a"}\n')
            with pytest.raises(DatasetFormatError):
                _ = DatasetDAO.load_predictions(path)


class TestCheckpointDAO:
    """Tests for the binary checkpoint"""

    def test_bit_exact_roundtrip(self):
        """Parameters, configurations and metadata are restored exactly"""
        checkpoint = _checkpoint()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "checkpoint.enflow"
            CheckpointDAO.save(checkpoint, path)
            assert path.read_bytes().startswith(CheckpointDAO.MAGIC)
            loaded = CheckpointDAO.load(path)

        assert loaded.theta.config == checkpoint.theta.config
        assert loaded.phi.config == checkpoint.phi.config
        assert loaded.theta.checksum() == checkpoint.theta.checksum()
        assert loaded.phi.checksum() == checkpoint.phi.checksum()
        for name, arr in checkpoint.theta:
            assert np.array_equal(loaded.theta.arrays[name], arr)
        assert loaded.meta == {"seed": 0, "tag": "drugs"}

    def test_missing_file(self):
        """A missing checkpoint raises FileNotFoundError"""
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(FileNotFoundError):
                _ = CheckpointDAO.load(Path(tmpdir) / "none.enflow")

    def test_bad_magic(self):
        """Foreign files are rejected"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "other.enflow"
            _ = path.write_bytes(b"not a checkpoint at all")
            with pytest.raises(CheckpointError):
                _ = CheckpointDAO.load(path)

    def test_unknown_version(self):
        """A newer version number is rejected"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "future.enflow"
            _ = path.write_bytes(CheckpointDAO.MAGIC + struct.pack("<H", 9) + b"\x00" * 8)
            with pytest.raises(CheckpointError, match="version 9"):
                _ = CheckpointDAO.load(path)

    def test_corrupt_payload(self):
        """Garbage after a valid header raises CheckpointError"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "broken.enflow"
            header = CheckpointDAO.MAGIC + struct.pack("<H", CheckpointDAO.VERSION)
            _ = path.write_bytes(header + b"\x01\x02\x03\x04")
            with pytest.raises(CheckpointError):
                _ = CheckpointDAO.load(path)

    def test_mismatched_tensors(self):
        """Tensors that do not fit their configuration raise CheckpointError"""
        checkpoint = _checkpoint()
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "checkpoint.enflow"
            CheckpointDAO.save(checkpoint, path)
            data = path.read_bytes()
            payload = msgpack.unpackb(zstd.decompress(data[CheckpointDAO.HEADER_SIZE :]), raw=False)
            del payload["theta"]["tensors"]["embed"]
            packed = msgpack.packb(payload, use_bin_type=True)
            _ = path.write_bytes(data[: CheckpointDAO.HEADER_SIZE] + zstd.ZSTD_compress(packed, 3))
            with pytest.raises(CheckpointError):
                _ = CheckpointDAO.load(path)
