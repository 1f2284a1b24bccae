"""Tests for the reverse-mode differentiation engine"""

from collections.abc import Callable

import numpy as np
import pytest

from enflow.autodiff import Tape, Tensor, grad, ops
from enflow.errors import NonScalarLoss, ShapeError

H = 1e-4
REL_TOL = 1e-4


def _check_vjp(fn: Callable[[Tensor], Tensor], x0: np.ndarray, seed: int = 0) -> None:
    """Compare the tape gradient of sum(w * fn(x)) with central differences"""
    weights = np.random.default_rng(seed).normal(size=fn(Tensor(x0)).shape)

    def scalar(x: np.ndarray) -> float:
        return float(np.sum(weights * fn(Tensor(x)).data))

    x = Tensor(x0, requires_grad=True)
    with Tape() as tape:
        loss = ops.sum_all(ops.mul(fn(x), Tensor(weights)))
    (g,) = tape.gradient(loss, [x])

    numeric = np.zeros_like(x0)
    for idx in np.ndindex(*x0.shape):
        plus, minus = x0.copy(), x0.copy()
        plus[idx] += H
        minus[idx] -= H
        numeric[idx] = (scalar(plus) - scalar(minus)) / (2 * H)
    scale = max(1.0, float(np.max(np.abs(numeric))))
    assert float(np.max(np.abs(g.data - numeric))) / scale < REL_TOL


class TestPrimitives:
    """Forward values of the primitives"""

    def test_add(self):
        """add([1,2],[3,4]) is [4,6]"""
        np.testing.assert_array_equal(ops.add(Tensor([1, 2]), Tensor([3, 4])).data, [4, 6])

    def test_norm_rows_clamp(self):
        """A zero row is clamped to eps"""
        out = ops.norm_rows(Tensor([[0.0, 0.0, 0.0]]), eps=0.01)
        np.testing.assert_array_equal(out.data, [[0.01]])

    def test_matmul_matches_loops(self):
        """matmul of 2x3 by 3x1 equals the triple loop"""
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 1))
        expected = np.zeros((2, 1))
        for i in range(2):
            for j in range(1):
                for k in range(3):
                    expected[i, j] += a[i, k] * b[k, j]
        np.testing.assert_allclose(ops.matmul(Tensor(a), Tensor(b)).data, expected, atol=1e-14)

    def test_shape_errors(self):
        """Mismatched shapes raise ShapeError"""
        with pytest.raises(ShapeError):
            _ = ops.add(Tensor([1.0, 2.0]), Tensor([1.0]))
        with pytest.raises(ShapeError):
            _ = ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 1))))
        with pytest.raises(ShapeError):
            _ = ops.concat([Tensor(np.ones((2, 1))), Tensor(np.ones((3, 1)))], axis=1)
        with pytest.raises(ShapeError):
            _ = ops.gather_rows(Tensor(np.ones((2, 2))), [2])

    def test_shifted_softplus_origin(self):
        """The activation vanishes at zero"""
        assert ops.shifted_softplus(Tensor([0.0])).data[0] == pytest.approx(0.0, abs=1e-15)

    def test_scatter_add(self):
        """Rows are summed into their targets"""
        out = ops.scatter_add_rows(Tensor([[1.0], [2.0], [3.0]]), [0, 1, 0], 2)
        np.testing.assert_array_equal(out.data, [[4.0], [2.0]])

    def test_operators(self):
        """Python operators dispatch to the primitives"""
        a, b = Tensor([2.0, 4.0]), Tensor([1.0, 2.0])
        np.testing.assert_array_equal((a + b).data, [3.0, 6.0])
        np.testing.assert_array_equal((a - b).data, [1.0, 2.0])
        np.testing.assert_array_equal((a * b).data, [2.0, 8.0])
        np.testing.assert_array_equal((a / b).data, [2.0, 2.0])
        np.testing.assert_array_equal((0.5 * a).data, [1.0, 2.0])
        np.testing.assert_array_equal((-a).data, [-2.0, -4.0])


class TestGradients:
    """Vector-Jacobian products against central differences"""

    rng = np.random.default_rng(42)

    @pytest.mark.parametrize(
        "name,fn",
        [
            ("square", ops.square),
            ("exp", ops.exp),
            ("cos", ops.cos),
            ("shifted_softplus", ops.shifted_softplus),
            ("scale", lambda x: ops.scale(x, -2.5)),
            ("mean", ops.mean),
            ("sum", ops.sum_all),
            ("self_mul", lambda x: ops.mul(x, x)),
            ("self_div", lambda x: ops.div(x, ops.add(ops.square(x), Tensor(np.ones((3, 4)))))),
            ("norm_rows", lambda x: ops.norm_rows(x, 0.01)),
            ("gather", lambda x: ops.gather_rows(x, [0, 2, 2, 1])),
            ("scatter", lambda x: ops.scatter_add_rows(x, [1, 1, 0], 2)),
            ("pairwise", lambda x: ops.pairwise_diff(x, [0, 1, 2], [1, 2, 0])),
            ("concat", lambda x: ops.concat([x, ops.square(x)], axis=1)),
            ("broadcast", lambda x: ops.broadcast_rows(ops.gather_rows(x, [0]), 5)),
            ("expand", lambda x: ops.expand_cols(ops.norm_rows(x, 0.01), 3)),
        ],
    )
    def test_primitive(self, name: str, fn: Callable[[Tensor], Tensor]):
        """Each primitive's gradient matches finite differences"""
        _ = name
        _check_vjp(fn, self.rng.normal(size=(3, 4)) + 0.1)

    def test_sqrt(self):
        """sqrt on positive inputs"""
        _check_vjp(ops.sqrt, self.rng.uniform(0.5, 2.0, size=(2, 3)))

    def test_linear(self):
        """Affine layer with respect to its input"""
        rng = np.random.default_rng(7)
        w, b = Tensor(rng.normal(size=(4, 2))), Tensor(rng.normal(size=(2,)))
        _check_vjp(lambda x: ops.linear(x, w, b), rng.normal(size=(3, 4)))


class TestTape:
    """Tests for Tape and grad"""

    def test_sum_of_squares(self):
        """d/dx sum(x^2) at [1,2,3] is [2,4,6]"""
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        with Tape() as tape:
            y = ops.sum_all(ops.square(x))
        (g,) = grad(y, [x], tape)
        np.testing.assert_array_equal(g.data, [2.0, 4.0, 6.0])

    def test_unreachable_is_zero(self):
        """A constant output has zero gradient"""
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = ops.sum_all(Tensor([5.0]))
        (g,) = grad(y, [x], tape)
        np.testing.assert_array_equal(g.data, [0.0, 0.0])
        assert len(tape) == 0

    def test_non_scalar(self):
        """Non-scalar outputs raise NonScalarLoss"""
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = ops.square(x)
        with pytest.raises(NonScalarLoss):
            _ = tape.gradient(y, [x])

    def test_gather_scatter_indicator(self):
        """grad of sum(gather(x, idx)) counts how often each row is picked"""
        x = Tensor(np.zeros((4, 2)), requires_grad=True)
        with Tape() as tape:
            y = ops.sum_all(ops.gather_rows(x, [0, 0, 3]))
        (g,) = tape.gradient(y, [x])
        np.testing.assert_array_equal(g.data[:, 0], [2.0, 0.0, 0.0, 1.0])

    def test_repeated_backward_is_identical(self):
        """Two backward passes over a frozen tape agree bit for bit"""
        x = Tensor(np.random.default_rng(0).normal(size=(3, 3)), requires_grad=True)
        with Tape() as tape:
            y = ops.sum_all(ops.shifted_softplus(ops.matmul(x, x)))
        (g1,) = tape.gradient(y, [x])
        (g2,) = tape.gradient(y, [x])
        assert np.array_equal(g1.data, g2.data)

    def test_frozen_tape_records_nothing(self):
        """A tape cannot be re-entered after its block exits"""
        tape = Tape()
        with tape:
            pass
        with pytest.raises(RuntimeError):
            with tape:
                pass

    def test_untracked_inputs_are_not_recorded(self):
        """Primitives on constants leave the tape empty"""
        with Tape() as tape:
            _ = ops.add(Tensor([1.0]), Tensor([2.0]))
        assert tape.ops == []
