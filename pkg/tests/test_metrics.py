"""Tests for RMSD, coverage and ground-state metrics"""

import json
import logging
import math
import tempfile
from pathlib import Path

import numpy as np
import pytest

from enflow.errors import EmptyDataset, EmptyEnsemble, InsufficientSamples, MissingLabels, ShapeError
from enflow.metrics import (
    MetricReport,
    amr,
    coverage,
    d_mae,
    d_rmse,
    default_delta,
    evaluate_generation,
    evaluate_ground_states,
    kabsch_rmsd,
    lower_median,
    rmsd_matrix,
)
from enflow.metrics.coverage import coverage_from_matrix
from enflow.models import Conformation, ConformerEnsemble, MolGraph


def _rotation(seed: int) -> np.ndarray:
    q, r = np.linalg.qr(np.random.default_rng(seed).normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _random(seed: int, n: int = 5) -> Conformation:
    return Conformation(np.random.default_rng(seed).normal(size=(n, 3)))


def _dimer(length: float) -> Conformation:
    return Conformation.from_array([[-length / 2, 0.0, 0.0], [length / 2, 0.0, 0.0]])


def _ensemble(mol_id: str, confs: list[Conformation], energies: list[float] | None = None) -> ConformerEnsemble:
    n = confs[0].n_atoms
    graph = MolGraph(atom_types=(0,) * n, bonds=tuple((i, i + 1) for i in range(n - 1)), mol_id=mol_id)
    return ConformerEnsemble(graph=graph, conformers=confs, energies=energies)


def _quaternion_rmsd(a: Conformation, b: Conformation) -> float:
    """Aligned RMSD from the largest eigenvalue of the quaternion key matrix, without an SVD"""
    x = a.coords - a.coords.mean(axis=0)
    y = b.coords - b.coords.mean(axis=0)
    s = y.T @ x
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = s
    key = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )
    top = float(np.linalg.eigvalsh(key)[-1])
    squared = (float(np.sum(x * x)) + float(np.sum(y * y)) - 2.0 * top) / a.n_atoms
    return math.sqrt(max(squared, 0.0))


def _euler_zyz(alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    ca, sa, cb, sb, cg, sg = np.cos(alpha), np.sin(alpha), np.cos(beta), np.sin(beta), np.cos(gamma), np.sin(gamma)
    return np.stack(
        [
            np.stack([ca * cb * cg - sa * sg, -ca * cb * sg - sa * cg, ca * sb], axis=-1),
            np.stack([sa * cb * cg + ca * sg, -sa * cb * sg + ca * cg, sa * sb], axis=-1),
            np.stack([-sb * cg, sb * sg, cb], axis=-1),
        ],
        axis=-2,
    )


def _grid_search_rmsd(a: Conformation, b: Conformation, points: int = 100) -> float:
    """
    Minimal RMSD over a points**3 Euler-angle grid, refined by three shrinking
    local grids around the best node.
    """
    x = a.coords - a.coords.mean(axis=0)
    y = b.coords - b.coords.mean(axis=0)
    m = x.T @ y
    base = float(np.sum(x * x) + np.sum(y * y))

    def search(alpha: np.ndarray, beta: np.ndarray, gamma: np.ndarray) -> tuple[float, tuple[float, float, float]]:
        aa, bb, gg = np.meshgrid(alpha, beta, gamma, indexing="ij")
        overlap = np.einsum("...ij,ij->...", _euler_zyz(aa, bb, gg), m)
        flat = int(np.argmax(overlap))
        return float(overlap.flat[flat]), (float(aa.flat[flat]), float(bb.flat[flat]), float(gg.flat[flat]))

    angles = np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)
    tilts = np.linspace(0.0, math.pi, points)
    best, node = -math.inf, (0.0, 0.0, 0.0)
    for alpha in angles:
        value, where = search(np.array([alpha]), tilts, angles)
        if value > best:
            best, node = value, where
    span = 2.0 * math.pi / points
    for _ in range(3):
        offsets = np.linspace(-span, span, 21)
        value, where = search(node[0] + offsets, node[1] + offsets, node[2] + offsets)
        if value > best:
            best, node = value, where
        span /= 5.0
    return math.sqrt(max((base - 2.0 * best) / a.n_atoms, 0.0))


class TestKabsch:
    """Tests for aligned RMSD"""

    def test_rigid_motion(self):
        """b = R a + s has zero RMSD to a"""
        a = _random(0)
        for seed in range(5):
            b = Conformation(a.coords @ _rotation(seed).T + np.array([1.0, -2.0, 0.5]))
            assert kabsch_rmsd(a, b) == pytest.approx(0.0, abs=1e-9)

    def test_identity(self):
        """a against itself is zero"""
        a = _random(1)
        assert kabsch_rmsd(a, a) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry_and_triangle(self):
        """Symmetric in its arguments and bounded by a detour"""
        for seed in range(10):
            a, b, c = _random(3 * seed), _random(3 * seed + 1), _random(3 * seed + 2)
            assert kabsch_rmsd(a, b) == pytest.approx(kabsch_rmsd(b, a), abs=1e-9)
            assert kabsch_rmsd(a, c) <= kabsch_rmsd(a, b) + kabsch_rmsd(b, c) + 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_grid_search(self, seed: int):
        """Kabsch agrees with a dense rotation grid search and is never beaten by it"""
        a, b = _random(2 * seed + 100, n=5), _random(2 * seed + 101, n=5)
        best = kabsch_rmsd(a, b)
        searched = _grid_search_rmsd(a, b)
        assert best <= searched + 1e-12
        assert searched - best < 1e-3

    def test_matches_quaternion_eigenvalue(self):
        """Kabsch agrees with the quaternion eigenvalue form on random pairs"""
        for seed in range(20):
            n = 3 + seed % 5
            a, b = _random(seed + 200, n=n), _random(seed + 300, n=n)
            assert kabsch_rmsd(a, b) == pytest.approx(_quaternion_rmsd(a, b), abs=1e-10)

    def test_mirror_image_is_not_aligned(self):
        """Reflections are not proper rotations"""
        a = _random(6, n=6)
        mirrored = Conformation(a.coords * np.array([1.0, 1.0, -1.0]))
        assert kabsch_rmsd(a, mirrored) > 1e-3

    def test_dimer_distance(self):
        """Bond lengths 1 and 1.6 differ by 0.3 per atom"""
        assert kabsch_rmsd(_dimer(1.0), _dimer(1.6)) == pytest.approx(0.3, abs=1e-9)

    def test_size_mismatch(self):
        """Different atom counts raise ShapeError"""
        with pytest.raises(ShapeError):
            _ = kabsch_rmsd(_random(0, 3), _random(0, 4))


class TestCoverage:
    """Tests for COV and AMR"""

    def test_self_match(self):
        """G = R gives COV 100 and AMR 0"""
        refs = [_random(s) for s in range(3)]
        assert coverage(refs, refs, 0.5) == 100.0
        assert amr(refs, refs) == pytest.approx(0.0, abs=1e-9)

    def test_single_pair_inside(self):
        """RMSD 0.3 with delta 0.5 is covered"""
        assert coverage([_dimer(1.0)], [_dimer(1.6)], 0.5) == 100.0
        assert amr([_dimer(1.0)], [_dimer(1.6)]) == pytest.approx(0.3, abs=1e-9)

    def test_single_pair_outside(self):
        """RMSD 0.6 with delta 0.5 is not covered"""
        assert coverage([_dimer(1.0)], [_dimer(2.2)], 0.5) == 0.0
        assert amr([_dimer(1.0)], [_dimer(2.2)]) == pytest.approx(0.6, abs=1e-9)

    def test_strict_threshold(self):
        """A distance equal to delta is not covered"""
        assert coverage_from_matrix(np.array([[0.5]]), 0.5) == 0.0

    def test_zero_delta(self):
        """delta 0 covers nothing without exact duplicates"""
        refs = [_random(s) for s in range(3)]
        gens = [_random(s + 10) for s in range(6)]
        assert coverage(refs, gens, 0.0) == 0.0

    def test_monotone_in_delta(self):
        """COV never decreases as delta grows, AMR does not depend on it"""
        refs = [_random(s) for s in range(4)]
        gens = [_random(s + 20) for s in range(8)]
        values = [coverage(refs, gens, d) for d in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 3.0)]
        assert values == sorted(values)
        assert all(0.0 <= v <= 100.0 for v in values)

    def test_rigid_motion_invariance(self):
        """Moving every generated conformer rigidly changes nothing"""
        refs = [_random(s) for s in range(3)]
        gens = [_random(s + 30) for s in range(6)]
        rot = _rotation(8)
        moved = [Conformation(g.coords @ rot.T + 2.0) for g in gens]
        np.testing.assert_allclose(rmsd_matrix(refs, moved), rmsd_matrix(refs, gens), atol=1e-9)

    def test_threaded_matrix(self):
        """Workers give the same matrix"""
        refs = [_random(s) for s in range(3)]
        gens = [_random(s + 40) for s in range(5)]
        np.testing.assert_array_equal(rmsd_matrix(refs, gens, workers=3), rmsd_matrix(refs, gens))

    def test_empty(self):
        """Empty sets raise EmptyEnsemble"""
        with pytest.raises(EmptyEnsemble):
            _ = coverage([], [_random(0)], 0.5)

    def test_default_delta(self):
        """qm9 0.5, drugs 0.75, unknown tags as drugs"""
        assert default_delta("qm9") == 0.5
        assert default_delta("DRUGS") == 0.75
        assert default_delta("toy") == 0.75


class TestEvaluateGeneration:
    """Tests for the per-molecule report"""

    def test_duplicated_references(self):
        """G = R twice gives COV 100 and AMR 0 both ways"""
        refs = [_random(s) for s in range(3)]
        report = evaluate_generation([_ensemble("m", refs)], [_ensemble("m", refs + refs)], 0.5)
        assert report.cov_r == 100.0
        assert report.cov_p == 100.0
        assert report.amr_r == pytest.approx(0.0, abs=1e-9)
        assert report.amr_p == pytest.approx(0.0, abs=1e-9)

    def test_double_loop_oracle(self):
        """Two molecules match a direct double loop over quaternion RMSDs"""
        data = [_ensemble("a", [_random(s, 4) for s in range(2)]), _ensemble("b", [_random(s + 5, 3) for s in range(3)])]
        gens = [
            _ensemble("a", [_random(s + 50, 4) for s in range(5)]),
            _ensemble("b", [_random(s + 60, 3) for s in range(6)]),
        ]
        delta = 1.0
        report = evaluate_generation(data, gens, delta)

        expected_cov_r, expected_amr_p = [], []
        for ref, gen in zip(data, gens):
            used = gen.conformers[: 2 * len(ref)]
            mins_r = [min(_quaternion_rmsd(r, g) for g in used) for r in ref.conformers]
            mins_p = [min(_quaternion_rmsd(r, g) for r in ref.conformers) for g in used]
            expected_cov_r.append(100.0 * sum(m < delta for m in mins_r) / len(mins_r))
            expected_amr_p.append(sum(mins_p) / len(mins_p))
        assert report.cov_r == pytest.approx(sum(expected_cov_r) / 2, abs=1e-10)
        assert report.amr_p == pytest.approx(sum(expected_amr_p) / 2, abs=1e-10)
        assert [m.n_gen for m in report.per_molecule] == [4, 6]

    def test_insufficient_samples(self):
        """Fewer than 2K generated conformers raise InsufficientSamples"""
        refs = [_random(s) for s in range(3)]
        with pytest.raises(InsufficientSamples):
            _ = evaluate_generation([_ensemble("m", refs)], [_ensemble("m", refs)], 0.5)
        with pytest.raises(InsufficientSamples):
            _ = evaluate_generation([_ensemble("m", refs)], [], 0.5)

    def test_empty_reference_is_skipped(self, caplog: pytest.LogCaptureFixture):
        """A molecule without reference conformers is left out with a warning"""
        refs = [_random(s) for s in range(2)]
        empty = ConformerEnsemble(graph=_ensemble("bare", refs).graph)
        with caplog.at_level(logging.WARNING, logger="Metrics"):
            report = evaluate_generation([empty, _ensemble("m", refs)], [_ensemble("m", refs * 2)], 0.5)
        assert [m.mol_id for m in report.per_molecule] == ["m"]
        assert "bare" in caplog.text
        with pytest.raises(EmptyDataset):
            _ = evaluate_generation([empty], [], 0.5)

    def test_lower_median(self):
        """Even counts use the lower middle value"""
        assert lower_median([3.0, 1.0, 2.0, 4.0]) == 2.0
        assert lower_median([5.0]) == 5.0
        with pytest.raises(EmptyDataset):
            _ = lower_median([])

    def test_report_files(self):
        """CSV ends with mean and median rows, JSON holds both aggregates"""
        refs = [_random(s) for s in range(2)]
        report = evaluate_generation([_ensemble("m", refs)], [_ensemble("m", refs * 2)], 0.75)
        assert isinstance(report, MetricReport)
        with tempfile.TemporaryDirectory() as tmpdir:
            csv_path, json_path = Path(tmpdir) / "metrics.csv", Path(tmpdir) / "metrics.json"
            report.save(csv_path, json_path)
            lines = csv_path.read_text().splitlines()
            data = json.loads(json_path.read_text())
        assert lines[0].startswith("mol_id,n_ref,n_gen,cov_r")
        assert lines[-2].startswith("mean,")
        assert lines[-1].startswith("median,")
        assert data["mean"]["cov_r"] == 100.0
        assert data["delta"] == 0.75


class TestGroundState:
    """Tests for D-MAE, D-RMSE and the ground-state report"""

    def test_identical(self):
        """Identical conformations have zero error"""
        a = _random(0)
        assert d_mae(a, a) == 0.0
        assert d_rmse(a, a) == 0.0

    def test_dimer(self):
        """Distance 1 against 2 gives 0.5 and sqrt(0.5)"""
        assert d_mae(_dimer(1.0), _dimer(2.0)) == pytest.approx(0.5)
        assert d_rmse(_dimer(1.0), _dimer(2.0)) == pytest.approx(math.sqrt(0.5))

    def test_rotation_invariance(self):
        """Rotating the prediction leaves both errors unchanged"""
        a, b = _random(1), _random(2)
        rotated = Conformation(b.coords @ _rotation(0).T)
        assert d_mae(a, rotated) == pytest.approx(d_mae(a, b), abs=1e-12)
        assert d_rmse(a, rotated) == pytest.approx(d_rmse(a, b), abs=1e-12)

    def test_rmse_bounds_mae(self):
        """D-RMSE is never below D-MAE"""
        for seed in range(10):
            a, b = _random(seed), _random(seed + 100)
            assert d_rmse(a, b) >= d_mae(a, b) - 1e-15

    def test_size_mismatch(self):
        """Different atom counts raise ShapeError"""
        with pytest.raises(ShapeError):
            _ = d_mae(_random(0, 3), _random(0, 4))

    def test_report(self):
        """Predicting the lowest-energy conformer scores zero"""
        confs = [_random(s, 4) for s in range(3)]
        data = [_ensemble("m", confs, energies=[1.0, -1.0, 0.5])]
        perfect = evaluate_ground_states(data, {"m": confs[1]})
        assert perfect.c_rmsd == pytest.approx(0.0, abs=1e-9)
        assert perfect.d_mae == 0.0
        wrong = evaluate_ground_states(data, {"m": confs[0]})
        assert wrong.d_mae > 0.0
        assert wrong.to_csv().splitlines()[-1].startswith("mean,")
        with pytest.raises(MissingLabels):
            _ = evaluate_ground_states(data, {})
