"""Finite-difference audit of every differentiable path: each registered op
kind, each loss, and the desk-scale model end to end.

Case inputs are drawn away from kinks (abs/relu/clamp edges, pool ties, the
banded-loss boundary) so central differences are meaningful; the band margin
is orders of magnitude wider than the probe step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import OP_KINDS, Tensor, forward_op, grad_check, mean
from ..autodiff.tensor import _make
from ..errors import ConfigError
from ..losses import ClassCenters, cc_loss, clip_bce
from ..mixing import patchup_loss
from ..model import ModelConfig, forward, init_params

THRESHOLD = 1e-4
STEP = 1e-5


def op_case(kind: str, rng: np.random.Generator):
    """Inputs and attrs keeping the op smooth at the probed points."""
    def t(arr):
        return Tensor(arr, requires_grad=True)

    if kind in ("add", "sub", "mul"):
        return [t(rng.normal(size=(3, 4))), t(rng.normal(size=(3, 4)))], {}
    if kind == "div":
        return [t(rng.normal(size=(3, 4))), t(rng.uniform(0.5, 2.0, size=(3, 4)))], {}
    if kind in ("neg", "tanh", "sigmoid", "softmax"):
        return [t(rng.normal(size=(3, 4)))], {}
    if kind == "pow":
        return [t(rng.uniform(0.5, 2.0, size=(3, 4)))], {"exponent": 3.0}
    if kind in ("abs", "relu"):
        v = rng.normal(size=(3, 4))
        v[np.abs(v) < 0.1] = 0.5
        return [t(v)], {}
    if kind == "exp":
        return [t(rng.normal(size=(3, 4)) * 0.5)], {}
    if kind == "log":
        return [t(rng.uniform(0.5, 3.0, size=(3, 4)))], {}
    if kind == "clamp":
        v = rng.normal(size=(3, 4)) * 2
        v[np.abs(np.abs(v) - 1.0) < 0.1] += 0.3
        return [t(v)], {"lo": -1.0, "hi": 1.0}
    if kind == "reshape":
        return [t(rng.normal(size=(3, 4)))], {"shape": (2, 6)}
    if kind == "permute":
        return [t(rng.normal(size=(2, 3, 4)))], {"axes": (2, 0, 1)}
    if kind == "expand":
        return [t(rng.normal(size=(1, 4)))], {"shape": (3, 4)}
    if kind == "getitem":
        return [t(rng.normal(size=(3, 4)))], {"idx": (slice(0, 2), slice(1, 3))}
    if kind == "index_select":
        return [t(rng.normal(size=(4, 3)))], {"indices": [0, 2, 2]}
    if kind == "concat":
        return [t(rng.normal(size=(2, 3))), t(rng.normal(size=(1, 3)))], {"axis": 0}
    if kind in ("sum", "mean"):
        return [t(rng.normal(size=(3, 4)))], {"axis": 1}
    if kind == "max":
        return [t(rng.normal(size=(3, 4)) + np.arange(4) * 10)], {"axis": 1}
    if kind == "matmul":
        return [t(rng.normal(size=(3, 4))), t(rng.normal(size=(4, 2)))], {}
    if kind == "linear":
        return [t(rng.normal(size=(3, 4))), t(rng.normal(size=(4, 2))),
                t(rng.normal(size=2))], {}
    if kind == "layer_norm":
        return [t(rng.normal(size=(3, 6))), t(rng.uniform(0.5, 1.5, size=6)),
                t(rng.normal(size=6))], {}
    if kind == "conv2d":
        return [t(rng.normal(size=(2, 2, 5, 5))), t(rng.normal(size=(3, 2, 3, 3))),
                t(rng.normal(size=3))], {"stride": 2, "padding": 1}
    if kind == "conv1d":
        return [t(rng.normal(size=(2, 2, 6))), t(rng.normal(size=(3, 2, 2))),
                t(rng.normal(size=3))], {"padding": (1, 0)}
    if kind == "maxpool2d":
        return [t(rng.normal(size=(2, 2, 4, 4)) * 3)], {"kernel": 2, "stride": 2}
    raise ConfigError(f"gradsuite: no case for op kind {kind!r}")


def _corrupt_grad(out: Tensor) -> Tensor:
    # fault-injection hook: scales the incoming gradient, forward unchanged
    def backward(g):
        if out.requires_grad:
            out._accumulate(1.5 * g)

    return _make("corrupt", out.data.copy(), (out,), backward)


@dataclass(frozen=True)
class SuiteCheck:
    name: str
    passed: bool
    max_rel_error: float
    n_seeds: int

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "max_rel_error": self.max_rel_error, "n_seeds": self.n_seeds}


@dataclass(frozen=True)
class SuiteReport:
    passed: bool
    threshold: float
    duration_s: float
    checks: tuple[SuiteCheck, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "threshold": self.threshold,
                "duration_s": round(self.duration_s, 3),
                "checks": [c.to_dict() for c in self.checks]}

    def failures(self) -> list[SuiteCheck]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> str:
        lines = [f"gradient suite: {'PASS' if self.passed else 'FAIL'} "
                 f"(threshold {self.threshold:g}, {self.duration_s:.1f} s)"]
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            lines.append(f"  {mark} {c.name:<14} max rel {c.max_rel_error:.3e} "
                         f"({c.n_seeds} seeds)")
        return "\n".join(lines) + "\n"


def _check_op(kind: str, seeds: int, corrupt: str | None) -> SuiteCheck:
    worst = 0.0
    ok = True
    for s in range(seeds):
        rng = np.random.default_rng((hash(kind) % 2 ** 16) * 10_000 + s)
        inputs, attrs = op_case(kind, rng)

        def objective(*ts):
            out = forward_op(kind, list(ts), **attrs)
            if corrupt == kind:
                out = _corrupt_grad(out)
            return mean(out * out)

        report = grad_check(objective, inputs, step=STEP, threshold=THRESHOLD)
        worst = max(worst, report.max_rel_error)
        ok = ok and report.passed
    return SuiteCheck(kind, ok, worst, seeds)


def _check_losses(seeds: int) -> list[SuiteCheck]:
    out = []

    def run(name, case):
        worst, ok = 0.0, True
        for s in range(seeds):
            rng = np.random.default_rng(777_000 + s)
            fn, inputs = case(rng)
            report = grad_check(fn, inputs, step=STEP, threshold=THRESHOLD)
            worst = max(worst, report.max_rel_error)
            ok = ok and report.passed
        out.append(SuiteCheck(name, ok, worst, seeds))

    def clip_case(rng):
        # probabilities inside the band with wide margin to both edges
        p = Tensor(rng.uniform(0.3, 0.7, size=12), requires_grad=True)
        y = rng.integers(0, 2, size=12)
        return (lambda t: clip_bce(y, t)), [p]

    def patchup_case(rng):
        p = Tensor(rng.uniform(0.1, 0.9, size=10), requires_grad=True)
        y_i = rng.integers(0, 2, size=10).astype(np.float64)
        lam = float(rng.uniform(0.2, 0.8))
        y_t = y_i * lam + rng.integers(0, 2, size=10) * (1.0 - lam)
        pu = float(rng.uniform(0.3, 0.9))
        return (lambda t: patchup_loss(t, y_i, y_t, pu)), [p]

    def cc_case(rng):
        m0, m1 = rng.normal(size=6), rng.normal(size=6)
        centers = ClassCenters(m0=m0, m1=m1)
        y = rng.integers(0, 2, size=4)
        f_val = rng.normal(size=(4, 6))
        target = np.where((y == 1)[:, None], m1, m0)
        f_val += np.where(np.abs(f_val - target) < 1e-2, 0.05, 0.0)
        G = rng.uniform(0.1, 1.0, size=(4, 6))
        f = Tensor(f_val, requires_grad=True)
        return (lambda t: cc_loss(t, y, centers, G)), [f]

    run("clip_bce", clip_case)
    run("patchup_loss", patchup_case)
    run("cc_loss", cc_case)
    return out


def _check_model(config: ModelConfig, seeds: int, tensors_per_seed: int = 6,
                 coords_per_tensor: int = 3) -> SuiteCheck:
    """End-to-end probe: banded BCE through the whole model, finite
    differences on a rotating seeded subset of parameter tensors."""
    worst, ok = 0.0, True
    for s in range(seeds):
        rng = np.random.default_rng(555_000 + s)
        params = init_params(config, seed=s)
        x = rng.normal(size=(2, config.hours, config.encoded_width))
        y = rng.integers(0, 2, size=2)
        names = [n for n, _ in params.trainable_items()]
        chosen = rng.choice(len(names), size=min(tensors_per_seed, len(names)),
                            replace=False)
        probes = [params[names[i]] for i in chosen]

        def objective(*ts):
            return clip_bce(y, forward(Tensor(x), params, config).prob)

        report = grad_check(objective, probes, step=STEP, threshold=THRESHOLD,
                            max_coords=coords_per_tensor, seed=s)
        worst = max(worst, report.max_rel_error)
        ok = ok and report.passed
    return SuiteCheck("model_e2e", ok, worst, seeds)


def run_gradcheck_suite(config: ModelConfig, seeds: int = 20,
                        corrupt: str | None = None) -> SuiteReport:
    """Audit every op kind, every loss, and the end-to-end model."""
    if corrupt is not None and corrupt not in OP_KINDS:
        raise ConfigError(f"gradsuite: cannot corrupt unknown op {corrupt!r}")
    start = time.perf_counter()
    checks: list[SuiteCheck] = []
    for kind in sorted(OP_KINDS):
        checks.append(_check_op(kind, seeds, corrupt))
    checks.extend(_check_losses(seeds))
    checks.append(_check_model(config, seeds))
    duration = time.perf_counter() - start
    return SuiteReport(passed=all(c.passed for c in checks),
                       threshold=THRESHOLD, duration_s=duration,
                       checks=tuple(checks))
