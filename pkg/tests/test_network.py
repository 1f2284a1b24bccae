"""Tests for the featurizer and the message-passing networks"""

import math

import numpy as np
import pytest

from enflow.errors import ConfigError, ModelError
from enflow.models import Conformation, MolGraph
from enflow.nn import (
    FeaturizerConfig,
    GraphBatch,
    ModelParams,
    NetConfig,
    cutoff,
    energies,
    energy,
    energy_grad,
    forward,
    rbf,
    vector_field,
    vector_field_batch,
)
from enflow.nn.params import parameter_shapes

SMALL = {"hidden": 8, "n_layers": 2, "n_atom_types": 4, "time_freqs": 2}


def _rotation(seed: int) -> np.ndarray:
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _molecule() -> tuple[MolGraph, Conformation]:
    g = MolGraph(atom_types=(0, 1, 2, 1), bonds=((0, 1), (1, 2), (2, 3)), mol_id="m")
    c = Conformation(np.random.default_rng(5).normal(scale=1.2, size=(4, 3)))
    return g, c


def _random_molecule(seed: int) -> tuple[MolGraph, np.ndarray]:
    rng = np.random.default_rng([17, seed])
    n = int(rng.integers(2, 7))
    types = tuple(int(a) for a in rng.integers(0, SMALL["n_atom_types"], size=n))
    bonds = tuple((i, i + 1) for i in range(n - 1))
    return MolGraph(atom_types=types, bonds=bonds), rng.normal(scale=1.3, size=(n, 3))


def _theta(seed: int = 0) -> ModelParams:
    return ModelParams.init(NetConfig.vector_field(**SMALL), seed, zero_heads=False)


def _phi(seed: int = 1) -> ModelParams:
    return ModelParams.init(NetConfig.energy_model(**SMALL), seed, zero_heads=False)


class TestFeaturize:
    """Tests for radial basis and cutoff"""

    def test_cutoff_values(self):
        """1 at zero, 0.5 halfway, 0 at and beyond the cutoff"""
        cfg = FeaturizerConfig()
        assert float(cutoff(0.0, cfg)) == pytest.approx(1.0)
        assert float(cutoff(cfg.d_cutoff / 2, cfg)) == pytest.approx(0.5)
        assert float(cutoff(cfg.d_cutoff, cfg)) == pytest.approx(0.0, abs=1e-15)
        assert float(cutoff(cfg.d_cutoff + 1.0, cfg)) == 0.0

    def test_rbf_peaks(self):
        """d=0 peaks at the last center, d=d_cutoff at the first"""
        cfg = FeaturizerConfig()
        assert int(np.argmax(rbf(0.0, cfg))) == cfg.n_rbf - 1
        assert int(np.argmax(rbf(cfg.d_cutoff, cfg))) == 0

    def test_rbf_formula(self):
        """d=0.7 with 8 functions matches a direct evaluation"""
        cfg = FeaturizerConfig(n_rbf=8, d_cutoff=5.0)
        low = math.exp(-5.0)
        beta = (2.0 / 8 * (1.0 - low)) ** -2
        expected = [
            math.exp(-beta * (math.exp(-0.7) - (low + k * (1.0 - low) / 7)) ** 2) for k in range(8)
        ]
        np.testing.assert_allclose(rbf(0.7, cfg), expected, rtol=1e-12)

    def test_invalid_config(self):
        """Non-positive cutoff is rejected"""
        with pytest.raises(ConfigError):
            FeaturizerConfig(d_cutoff=0.0).check()


class TestParams:
    """Tests for ModelParams"""

    def test_zero_heads(self):
        """Default initialization gives a zero field and a zero energy"""
        g, c = _molecule()
        theta = ModelParams.init(NetConfig.vector_field(**SMALL), 0)
        phi = ModelParams.init(NetConfig.energy_model(**SMALL), 1)
        np.testing.assert_array_equal(vector_field(theta, g, c, 0.3), np.zeros((4, 3)))
        assert energy(phi, g, c) == 0.0

    def test_shapes_and_names(self):
        """Arrays follow parameter_shapes in order"""
        theta = _theta()
        shapes = parameter_shapes(theta.config)
        assert theta.names() == list(shapes)
        assert all(arr.shape == shapes[name] for name, arr in theta)
        assert "readout.w" not in shapes
        assert "readout.w" in parameter_shapes(_phi().config)

    def test_bond_channel_width(self):
        """The bond column widens the first message layer by one"""
        n_rbf = FeaturizerConfig().n_rbf
        h = SMALL["hidden"]
        with_bonds = parameter_shapes(NetConfig.vector_field(**SMALL))
        without = parameter_shapes(NetConfig.vector_field(**SMALL, featurizer=FeaturizerConfig(bond_channel=False)))
        assert with_bonds["layer0.msg1.w"] == (2 * h + n_rbf + 1, h)
        assert without["layer0.msg1.w"] == (2 * h + n_rbf, h)

    def test_seed_determinism(self):
        """Equal seeds give equal parameters"""
        assert _theta(3).checksum() == _theta(3).checksum()
        assert _theta(3).checksum() != _theta(4).checksum()

    def test_copy_is_deep(self):
        """Changing a copy leaves the original intact"""
        theta = _theta()
        clone = theta.copy()
        clone.arrays["embed"][0, 0] += 1.0
        assert clone.checksum() != theta.checksum()

    def test_invalid_arrays(self):
        """Wrong names or shapes raise ModelError"""
        theta = _theta()
        arrays = dict(theta.arrays)
        arrays["embed"] = np.zeros((1, 1))
        with pytest.raises(ModelError):
            _ = ModelParams(config=theta.config, arrays=arrays)
        with pytest.raises(ModelError):
            _ = ModelParams(config=theta.config, arrays={})


class TestEquivariance:
    """Symmetry properties of both heads"""

    @pytest.mark.parametrize("seed", range(100))
    def test_vector_field_rotates(self, seed: int):
        """v(Rc) = R v(c)"""
        g, c = _molecule()
        theta = _theta()
        rot = _rotation(seed)
        rotated = vector_field(theta, g, c.coords @ rot.T, 0.4)
        np.testing.assert_allclose(rotated, vector_field(theta, g, c, 0.4) @ rot.T, atol=1e-8)

    def test_translation_invariance(self):
        """Shifting every atom changes neither head"""
        g, c = _molecule()
        theta, phi = _theta(), _phi()
        shifted = c.coords + np.array([3.0, -1.0, 0.5])
        np.testing.assert_allclose(vector_field(theta, g, shifted, 0.4), vector_field(theta, g, c, 0.4), atol=1e-10)
        assert energy(phi, g, shifted) == pytest.approx(energy(phi, g, c), abs=1e-10)

    @pytest.mark.parametrize("seed", range(100))
    def test_energy_rotation_invariance(self, seed: int):
        """J(Rc) = J(c)"""
        g, c = _molecule()
        phi = _phi()
        rotated = c.coords @ _rotation(seed).T
        assert energy(phi, g, rotated) == pytest.approx(energy(phi, g, c), abs=1e-10)

    def test_permutation_consistency(self):
        """Relabeling atoms by a graph automorphism permutes the field"""
        g = MolGraph(atom_types=(0, 1, 0), bonds=((0, 1), (1, 2)))
        c = np.random.default_rng(2).normal(size=(3, 3))
        perm = [2, 1, 0]
        theta = _theta()
        v = vector_field(theta, g, c, 0.5)
        np.testing.assert_allclose(vector_field(theta, g, c[perm], 0.5), v[perm], atol=1e-10)

    def test_time_conditioning(self):
        """t=0 and t=1 give different node states"""
        g, c = _molecule()
        theta = _theta()
        assert not np.allclose(forward(theta, g, c, 0.0).scalars, forward(theta, g, c, 1.0).scalars)


class TestGradients:
    """Coordinate gradients of the energy"""

    @pytest.mark.parametrize("seed", range(100))
    def test_energy_grad_finite_differences(self, seed: int):
        """energy_grad matches central differences on random small molecules"""
        g, c = _random_molecule(seed)
        phi = _phi(seed)
        analytic = energy_grad(phi, g, c)
        h = 1e-4
        numeric = np.zeros_like(c)
        for idx in np.ndindex(*c.shape):
            plus, minus = c.copy(), c.copy()
            plus[idx] += h
            minus[idx] -= h
            numeric[idx] = (energy(phi, g, plus) - energy(phi, g, minus)) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(numeric))))
        assert float(np.max(np.abs(analytic - numeric))) / scale < 1e-4

    def test_energy_grad_sums_to_zero(self):
        """Translation invariance makes the column sums vanish"""
        g, c = _molecule()
        np.testing.assert_allclose(energy_grad(_phi(), g, c).sum(axis=0), 0.0, atol=1e-8)


class TestBatching:
    """Packed batches against single-molecule calls"""

    def test_batch_matches_single(self):
        """A batch of two molecules equals two separate calls"""
        g1, c1 = _molecule()
        g2 = MolGraph(atom_types=(3, 0), bonds=((0, 1),))
        c2 = np.array([[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]])
        theta, phi = _theta(), _phi()
        fields = vector_field_batch(theta, [g1, g2], [c1, c2], [0.2, 0.7])
        np.testing.assert_allclose(fields[0], vector_field(theta, g1, c1, 0.2), atol=1e-12)
        np.testing.assert_allclose(fields[1], vector_field(theta, g2, c2, 0.7), atol=1e-12)
        np.testing.assert_allclose(energies(phi, [g1, g2], [c1, c2]), [energy(phi, g1, c1), energy(phi, g2, c2)], atol=1e-12)

    def test_pairs(self):
        """Every ordered intra-molecule pair is an edge"""
        batch = GraphBatch.from_graphs([MolGraph(atom_types=(0, 0, 0)), MolGraph(atom_types=(1, 1))], 4)
        assert batch.n_nodes == 5
        assert batch.n_edges == 6 + 2
        assert batch.n_mols == 2

    def test_bonded_flags(self):
        """Both directions of every bond are flagged and nothing else"""
        g, _ = _molecule()
        batch = GraphBatch.from_graphs([g, MolGraph(atom_types=(1, 1))], 4)
        assert batch.bonded.shape == (batch.n_edges, 1)
        bonds = {frozenset(b) for b in g.bonds}
        for recv, send, flag in zip(batch.recv.tolist(), batch.send.tolist(), batch.bonded[:, 0].tolist(), strict=True):
            expected = recv < 4 and frozenset((recv, send)) in bonds
            assert flag == (1.0 if expected else 0.0)
        assert batch.bonded.sum() == 2 * len(g.bonds)

    def test_bonds_change_energy(self):
        """Equal coordinates with different bonds give different energies only with the bond column"""
        c = np.random.default_rng(8).normal(scale=1.2, size=(4, 3))
        chain = MolGraph(atom_types=(0, 0, 0, 0), bonds=((0, 1), (1, 2), (2, 3)))
        star = MolGraph(atom_types=(0, 0, 0, 0), bonds=((0, 1), (0, 2), (0, 3)))
        phi = _phi()
        assert energy(phi, chain, c) != pytest.approx(energy(phi, star, c), abs=1e-9)
        plain = NetConfig.energy_model(**SMALL, featurizer=FeaturizerConfig(bond_channel=False))
        phi_plain = ModelParams.init(plain, 1, zero_heads=False)
        assert energy(phi_plain, chain, c) == pytest.approx(energy(phi_plain, star, c), abs=1e-12)

    def test_errors(self):
        """Wrong sizes, unknown atom types, bad t and wrong heads raise ModelError"""
        g, c = _molecule()
        theta, phi = _theta(), _phi()
        with pytest.raises(ModelError):
            _ = vector_field(theta, g, np.zeros((3, 3)), 0.5)
        with pytest.raises(ModelError):
            _ = vector_field(theta, MolGraph(atom_types=(9,)), np.zeros((1, 3)), 0.5)
        with pytest.raises(ModelError):
            _ = vector_field(theta, g, c, 1.5)
        with pytest.raises(ModelError):
            _ = energy(theta, g, c)
        with pytest.raises(ModelError):
            _ = vector_field(phi, g, c, 0.5)
