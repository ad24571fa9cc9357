"""The gradient-check harness itself: catches planted bugs, passes good ops."""

import numpy as np
import pytest

from vitalseq.autodiff import (
    OP_KINDS, Tensor, grad_check, linear, mean, mul, relu, sigmoid, sum_,
)


class TestGradCheck:
    def test_passes_correct_composite(self):
        rng = np.random.default_rng(0)
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        b = Tensor(rng.normal(size=2), requires_grad=True)

        def f(x, w, b):
            return mean(sigmoid(linear(relu(x), w, b)))

        report = grad_check(f, [x, w, b])
        assert report.passed, report.summary()
        assert report.max_rel_error < 1e-4

    def test_catches_wrong_gradient(self):
        # plant a bug: forward is x^2 but the claimed gradient is 3x
        def broken_square(t: Tensor) -> Tensor:
            from vitalseq.autodiff.tensor import _make

            def backward(g):
                if t.requires_grad:
                    t._accumulate(g * 3.0 * t.data)

            return _make("broken", t.data ** 2, (t,), backward)

        x = Tensor([1.0, 2.0], requires_grad=True)
        report = grad_check(lambda t: sum_(broken_square(t)), [x])
        assert not report.passed
        assert report.max_rel_error > 0.1

    def test_catches_sign_flip(self):
        def flipped(t: Tensor) -> Tensor:
            from vitalseq.autodiff.tensor import _make

            def backward(g):
                if t.requires_grad:
                    t._accumulate(-g)

            return _make("flipped", t.data.copy(), (t,), backward)

        x = Tensor([0.5, -0.3], requires_grad=True)
        report = grad_check(lambda t: sum_(flipped(t)), [x])
        assert not report.passed

    def test_fixed_inputs_skipped(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([3.0, 4.0])  # held constant
        report = grad_check(lambda a, b: sum_(mul(a, b)), [x, c])
        assert report.passed
        assert len(report.per_input) == 1
        assert report.per_input[0]["input"] == 0

    def test_subsampling_bounds_work(self):
        rng = np.random.default_rng(1)
        x = Tensor(rng.normal(size=(10, 10)), requires_grad=True)
        report = grad_check(lambda t: mean(t * t), [x], max_coords=7, seed=3)
        assert report.passed
        assert report.per_input[0]["coords_checked"] == 7

    def test_subsampling_reproducible(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(size=(8, 8)), requires_grad=True)
        r1 = grad_check(lambda t: mean(t * t * t), [x], max_coords=5, seed=11)
        r2 = grad_check(lambda t: mean(t * t * t), [x], max_coords=5, seed=11)
        assert r1.per_input[0]["worst_coord"] == r2.per_input[0]["worst_coord"]

    def test_rejects_nonscalar_objective(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            grad_check(lambda t: t * t, [x])

    def test_report_summary_format(self):
        x = Tensor([1.0], requires_grad=True)
        report = grad_check(lambda t: sum_(t * t), [x])
        line = report.summary()
        assert line.startswith("PASS") and "max_rel_error" in line


def _op_fixture(kind, rng):
    """Inputs and attrs that keep each op smooth and well-conditioned."""
    if kind == "add" or kind == "sub" or kind == "mul":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True),
                Tensor(rng.normal(size=(3, 4)), requires_grad=True)], {}
    if kind == "div":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True),
                Tensor(rng.uniform(0.5, 2.0, size=(3, 4)), requires_grad=True)], {}
    if kind == "neg" or kind == "tanh" or kind == "sigmoid" or kind == "softmax":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True)], {}
    if kind == "pow":
        return [Tensor(rng.uniform(0.5, 2.0, size=(3, 4)), requires_grad=True)], {"exponent": 3.0}
    if kind == "abs":
        v = rng.normal(size=(3, 4))
        v[np.abs(v) < 0.1] = 0.5  # keep clear of the kink
        return [Tensor(v, requires_grad=True)], {}
    if kind == "relu":
        v = rng.normal(size=(3, 4))
        v[np.abs(v) < 0.1] = 0.5
        return [Tensor(v, requires_grad=True)], {}
    if kind == "exp":
        return [Tensor(rng.normal(size=(3, 4)) * 0.5, requires_grad=True)], {}
    if kind == "log":
        return [Tensor(rng.uniform(0.5, 3.0, size=(3, 4)), requires_grad=True)], {}
    if kind == "clamp":
        v = rng.normal(size=(3, 4)) * 2
        v[np.abs(np.abs(v) - 1.0) < 0.1] += 0.3  # keep clear of the bounds
        return [Tensor(v, requires_grad=True)], {"lo": -1.0, "hi": 1.0}
    if kind == "reshape":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True)], {"shape": (2, 6)}
    if kind == "permute":
        return [Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)], {"axes": (2, 0, 1)}
    if kind == "expand":
        return [Tensor(rng.normal(size=(1, 4)), requires_grad=True)], {"shape": (3, 4)}
    if kind == "getitem":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True)], {"idx": (slice(0, 2), slice(1, 3))}
    if kind == "index_select":
        return [Tensor(rng.normal(size=(4, 3)), requires_grad=True)], {"indices": [0, 2, 2]}
    if kind == "concat":
        return [Tensor(rng.normal(size=(2, 3)), requires_grad=True),
                Tensor(rng.normal(size=(1, 3)), requires_grad=True)], {"axis": 0}
    if kind == "sum" or kind == "mean":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True)], {"axis": 1}
    if kind == "max":
        v = rng.normal(size=(3, 4))
        return [Tensor(v + np.arange(4) * 10, requires_grad=True)], {"axis": 1}
    if kind == "matmul":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True),
                Tensor(rng.normal(size=(4, 2)), requires_grad=True)], {}
    if kind == "linear":
        return [Tensor(rng.normal(size=(3, 4)), requires_grad=True),
                Tensor(rng.normal(size=(4, 2)), requires_grad=True),
                Tensor(rng.normal(size=2), requires_grad=True)], {}
    if kind == "layer_norm":
        return [Tensor(rng.normal(size=(3, 6)), requires_grad=True),
                Tensor(rng.uniform(0.5, 1.5, size=6), requires_grad=True),
                Tensor(rng.normal(size=6), requires_grad=True)], {}
    if kind == "conv2d":
        return [Tensor(rng.normal(size=(2, 2, 5, 5)), requires_grad=True),
                Tensor(rng.normal(size=(3, 2, 3, 3)), requires_grad=True),
                Tensor(rng.normal(size=3), requires_grad=True)], {"stride": 2, "padding": 1}
    if kind == "conv1d":
        return [Tensor(rng.normal(size=(2, 2, 6)), requires_grad=True),
                Tensor(rng.normal(size=(3, 2, 2)), requires_grad=True),
                Tensor(rng.normal(size=3), requires_grad=True)], {"padding": (1, 0)}
    if kind == "maxpool2d":
        v = rng.normal(size=(2, 2, 4, 4)) * 3  # spread values: no near-ties
        return [Tensor(v, requires_grad=True)], {"kernel": 2, "stride": 2}
    raise AssertionError(f"no fixture for op kind {kind!r}")


@pytest.mark.parametrize("kind", sorted(OP_KINDS))
def test_every_registered_op_passes_gradcheck(kind):
    from vitalseq.autodiff import forward_op

    rng = np.random.default_rng(hash(kind) % 2 ** 31)
    inputs, attrs = _op_fixture(kind, rng)

    def objective(*ts):
        out = forward_op(kind, list(ts), **attrs)
        return mean(out * out)

    report = grad_check(objective, inputs)
    assert report.passed, f"{kind}: {report.summary()}"
