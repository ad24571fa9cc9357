"""Two-pass training step: forward with optional feature mixing, a first
backward to hook the gradient attention at the feature vector, then a second
backward on the total loss that actually updates the parameters.

Step order per batch:
  1. forward, mixing the pseudo-sequence when the per-batch draw fires;
  2. update class centers from the detached feature vectors;
  3. banded cross-entropy on the (possibly mixed) predictions;
  4. first backward; capture the raw gradient at the feature vector;
  5. min-max normalize it to the attention weights G;
  6. center-distance loss and mixing loss;
  7. clear all gradients; backward the summed total; optimizer update.

Disabled parts are skipped entirely (no graph nodes, no random draws), so a
run with everything off reduces bit-for-bit to plain banded-BCE descent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, zero_grads
from .errors import ConfigError, NonFiniteError
from .losses import (
    ClassCenters, LossBreakdown, attention_from_gradient, cc_loss, clip_bce,
    total_loss, update_centers,
)
from .mixing import MixOutcome, PatchUpConfig, apply_mix, patchup_loss, plan_patchup
from .model import ModelConfig, Params, forward


@dataclass(frozen=True)
class LossToggles:
    clip_bce: bool = True
    patchup: bool = False
    cc: bool = False


@dataclass
class OptimState:
    """Optimizer kind, step size, moments, and the step counter."""

    kind: str = "sgd"
    lr: float = 0.05
    iteration: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: int = 0

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"optimizer kind must be 'sgd' or 'adam', got {self.kind!r}")


def apply_gradients(params: Params, state: OptimState) -> None:
    """One optimizer update over the trainable tensors holding gradients."""
    if state.kind == "sgd":
        for name, t in params.trainable_items():
            if t.grad is not None:
                t.data -= state.lr * t.grad
        return
    state.adam_t += 1
    c1 = 1.0 - state.beta1 ** state.adam_t
    c2 = 1.0 - state.beta2 ** state.adam_t
    for name, t in params.trainable_items():
        if t.grad is None:
            continue
        m = state.m.setdefault(name, np.zeros_like(t.data))
        v = state.v.setdefault(name, np.zeros_like(t.data))
        m += (1.0 - state.beta1) * (t.grad - m)
        v += (1.0 - state.beta2) * (t.grad * t.grad - v)
        t.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass
class TrainState:
    optim: OptimState
    centers: ClassCenters | None = None
    mix_rng: np.random.Generator | None = None


def train_step(params: Params, config: ModelConfig, batch_x: np.ndarray,
               batch_y: np.ndarray, state: TrainState, toggles: LossToggles,
               patchup_cfg: PatchUpConfig | None = None) -> LossBreakdown:
    """One parameter update; returns the realized loss parts."""
    if len(batch_y) == 0:
        raise ConfigError("train_step: empty batch")
    if toggles.cc and not toggles.clip_bce:
        raise ConfigError("train_step: the center loss derives its attention "
                          "weights from the banded BCE gradient; enable clip_bce")

    outcome: MixOutcome | None = None
    if toggles.patchup:
        if patchup_cfg is None or state.mix_rng is None:
            raise ConfigError("train_step: patchup enabled without config or rng")
        seq_shape = (config.hours, config.seq_dim)
        outcome = plan_patchup(batch_y, seq_shape, patchup_cfg, state.mix_rng)

    mix_fn = (lambda seq: apply_mix(seq, outcome)) if outcome is not None else None
    result = forward(Tensor(batch_x), params, config, mix_fn=mix_fn)
    f = result.hooks["feature_vector"]

    if toggles.cc:
        if state.centers is None:
            raise ConfigError("train_step: cc enabled without centers state")
        state.centers = update_centers(state.centers, f.data.copy(), batch_y,
                                       state.optim.iteration)

    clip_part = clip_bce(batch_y, result.prob) if toggles.clip_bce else None

    cc_part = None
    if toggles.cc:
        zero_grads(clip_part)
        clip_part.backward()
        raw = f.grad.copy() if f.grad is not None else np.zeros_like(f.data)
        G = attention_from_gradient(raw)
        cc_part = cc_loss(f, batch_y, state.centers, G)

    patchup_part = None
    if outcome is not None:
        patchup_part = patchup_loss(result.prob, batch_y.astype(np.float64),
                                    outcome.y_target, outcome.pu)

    total, breakdown = total_loss(clip_part, patchup_part, cc_part)
    if not np.isfinite(breakdown.total):
        raise NonFiniteError(f"train_step: non-finite total at iteration "
                             f"{state.optim.iteration}: {breakdown.to_dict()}")
    zero_grads(total)  # drop first-pass gradients; the attention pass leaves no residue
    total.backward()
    apply_gradients(params, state.optim)
    zero_grads(total)
    state.optim.iteration += 1
    return breakdown


def predict(params: Params, config: ModelConfig, X: np.ndarray,
            batch_size: int = 64) -> np.ndarray:
    """Score samples without building a graph; returns probabilities."""
    from .autodiff import no_grad
    out = []
    with no_grad():
        for i in range(0, len(X), batch_size):
            out.append(forward(Tensor(X[i:i + batch_size]), params, config).prob.data)
    return np.concatenate(out) if out else np.empty(0)


def trace_line(iteration: int, breakdown: LossBreakdown) -> str:
    """One JSONL record of a step's losses."""
    rec = {"iteration": iteration, **breakdown.to_dict()}
    return json.dumps(rec, sort_keys=True)


def train_epochs(params: Params, config: ModelConfig, X: np.ndarray,
                 y: np.ndarray, state: TrainState, toggles: LossToggles,
                 patchup_cfg: PatchUpConfig | None, epochs: int,
                 batch_size: int, shuffle_rng: np.random.Generator,
                 trace_fh=None) -> list[LossBreakdown]:
    """Mini-batch epochs over (X, y); returns the per-step loss history."""
    history: list[LossBreakdown] = []
    n = len(y)
    for _ in range(epochs):
        order = shuffle_rng.permutation(n)
        for i in range(0, n, batch_size):
            sel = order[i:i + batch_size]
            breakdown = train_step(params, config, X[sel], y[sel], state,
                                   toggles, patchup_cfg)
            history.append(breakdown)
            if trace_fh is not None:
                trace_fh.write(trace_line(state.optim.iteration - 1, breakdown) + "\n")
    return history
