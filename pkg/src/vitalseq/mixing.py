"""Feature-space mixing: convex mixes, block masks, hard/soft swap-blend
regularization, reweighted targets, and the mixed-prediction loss term.

Masks, coefficients and pairings are drawn once per batch event from a
caller-owned random source; the mixing itself is ordinary differentiable
tensor arithmetic, so gradients reach both mixed operands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field, field_validator

from .autodiff import Tensor, clamp, expand, index_select, log, mean, reshape
from .errors import ConfigError, ShapeError


class PatchUpConfig(BaseModel, frozen=True):
    """Block-mixing hyperparameters; defaults follow the reference setting
    (probability 1.0, gamma 0.75, block size 1, soft mode)."""

    patchup_prob: float = Field(default=1.0, ge=0.0, le=1.0)
    gamma: float = Field(default=0.75, ge=0.0, le=1.0)
    block_size: int = Field(default=1, ge=1)
    mode: str = "soft"
    alpha: float = Field(default=2.0, gt=0.0)
    sites: tuple[str, ...] = ("pseudo_sequence",)

    @field_validator("block_size")
    @classmethod
    def _odd(cls, v):
        if v % 2 == 0:
            raise ValueError(f"block_size must be odd, got {v}")
        return v

    @field_validator("mode")
    @classmethod
    def _mode(cls, v):
        if v not in ("hard", "soft"):
            raise ValueError(f"mode must be 'hard' or 'soft', got {v!r}")
        return v


@dataclass(frozen=True)
class BlockMask:
    """Binary keep-mask (1 = unaltered) whose 0-regions are unions of
    axis-aligned blocks; pu is the exact fraction of 1-entries."""

    mask: np.ndarray
    pu: float


@dataclass
class MixOutcome:
    """One batch mixing event: what was mixed, how, and the two targets."""

    mode: str
    mask: np.ndarray       # per-sample activation shape, entries {0., 1.}
    lam: float
    pu: float
    perm: np.ndarray       # partner permutation over the batch
    w_target: np.ndarray   # reweighted target W per sample
    y_target: np.ndarray   # mix target Y per sample
    mixed: Tensor | None = None


def _check_unit(name: str, *values) -> None:
    for v in values:
        arr = np.asarray(v, dtype=np.float64)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ConfigError(f"{name}: value outside [0, 1]")


def _check_same_shape(op: str, a, b) -> None:
    sa = a.shape if hasattr(a, "shape") else ()
    sb = b.shape if hasattr(b, "shape") else ()
    if sa != sb:
        raise ShapeError(f"{op}: shapes {sa} and {sb} differ")


def mix_lambda(a, b, lam: float):
    """Convex combination lam * a + (1 - lam) * b."""
    _check_unit("mix_lambda", lam)
    _check_same_shape("mix_lambda", a, b)
    return a * lam + b * (1.0 - lam)


def patchup_hard(g_i, g_j, m):
    """Swap the masked-out region: M * g_i + (1 - M) * g_j."""
    _check_same_shape("patchup_hard", g_i, g_j)
    _check_same_shape("patchup_hard", g_i, m)
    return g_i * m + g_j * (1.0 - m)


def patchup_soft(g_i, g_j, m, lam: float):
    """Keep the masked-in region, blend the rest:
    M * g_i + Mix_lam[(1-M) * g_i, (1-M) * g_j]."""
    _check_unit("patchup_soft", lam)
    _check_same_shape("patchup_soft", g_i, g_j)
    _check_same_shape("patchup_soft", g_i, m)
    inv = 1.0 - m
    return g_i * m + mix_lambda(g_i * inv, g_j * inv, lam)


def manifold_mixup(g_i, g_j, lam: float):
    """Mask-free whole-activation mix; targets mix with the same lam."""
    return mix_lambda(g_i, g_j, lam)


def sample_block_mask(shape: tuple[int, ...], cfg: PatchUpConfig,
                      rng: np.random.Generator) -> BlockMask:
    """Draw a keep-mask whose altered (0) cells form block-size-aligned boxes.

    Seed cells go Bernoulli(gamma_adj) at positions where a full block fits,
    then dilate to the whole block; gamma_adj rescales gamma so the expected
    altered fraction stays near gamma despite dilation. Block size 1 is plain
    i.i.d. Bernoulli(gamma).
    """
    bs = cfg.block_size
    if any(bs > e for e in shape):
        raise ShapeError(f"block size {bs} exceeds activation extents {shape}")
    if bs == 1:
        altered = rng.random(shape) < cfg.gamma
    else:
        half = bs // 2
        valid = tuple(e - bs + 1 for e in shape)
        total = int(np.prod(shape))
        n_valid = int(np.prod(valid))
        gamma_adj = min(1.0, cfg.gamma * total / (bs ** len(shape) * n_valid))
        seeds = np.zeros(shape, dtype=bool)
        interior = tuple(slice(half, half + v) for v in valid)
        seeds[interior] = rng.random(valid) < gamma_adj
        altered = seeds
        for axis in range(len(shape)):  # separable box dilation
            grown = altered.copy()
            for off in range(-half, half + 1):
                if off == 0:
                    continue
                shifted = np.zeros_like(altered)
                src = [slice(None)] * len(shape)
                dst = [slice(None)] * len(shape)
                if off > 0:
                    src[axis] = slice(0, shape[axis] - off)
                    dst[axis] = slice(off, shape[axis])
                else:
                    src[axis] = slice(-off, shape[axis])
                    dst[axis] = slice(0, shape[axis] + off)
                shifted[tuple(dst)] = altered[tuple(src)]
                grown |= shifted
            altered = grown
    mask = (~altered).astype(np.float64)
    return BlockMask(mask=mask, pu=float(mask.sum() / mask.size))


def reweighted_target(y_i, y_j, pu: float, lam: float, mode: str):
    """The (W, Y) target pair for a mixing event.

    hard: W = Mix_pu(y_i, y_j), Y = y_j.
    soft: W = Mix_pu(y_i, Mix_lam(y_i, y_j)), Y = Mix_lam(y_i, y_j).
    """
    _check_unit("reweighted_target", y_i, y_j, pu, lam)
    if mode == "hard":
        return mix_lambda(y_i, y_j, pu), y_j
    if mode == "soft":
        y_mix = mix_lambda(y_i, y_j, lam)
        return mix_lambda(y_i, y_mix, pu), y_mix
    raise ConfigError(f"reweighted_target: unknown mode {mode!r}")


def _bce_elementwise(p: Tensor, target: np.ndarray) -> Tensor:
    t = Tensor(np.asarray(target, dtype=np.float64))
    return -(t * log(p) + (1.0 - t) * log(1.0 - p))


def patchup_loss(pred: Tensor, y_i, y_target, pu: float) -> Tensor:
    """pu-weighted pair of cross-entropies against y_i and the mix target Y,
    averaged over the batch. Predictions are clamped to [1e-7, 1 - 1e-7]."""
    _check_unit("patchup_loss", y_i, y_target, pu)
    p = clamp(pred, 1e-7, 1.0 - 1e-7)
    per_sample = _bce_elementwise(p, y_i) * pu + _bce_elementwise(p, y_target) * (1.0 - pu)
    return mean(per_sample)


def plan_patchup(labels: np.ndarray, activation_shape: tuple[int, ...],
                 cfg: PatchUpConfig,
                 rng: np.random.Generator) -> MixOutcome | None:
    """Decide whether this batch mixes and draw every random ingredient.

    Returns None without touching the random source when the probability is
    zero, so a zero-probability run is bit-identical to a disabled one.
    """
    if cfg.patchup_prob == 0.0:
        return None
    if rng.random() >= cfg.patchup_prob:
        return None
    lam = float(rng.beta(cfg.alpha, cfg.alpha))
    perm = rng.permutation(len(labels))
    block = sample_block_mask(activation_shape, cfg, rng)
    y_i = np.asarray(labels, dtype=np.float64)
    y_j = y_i[perm]
    w, y = reweighted_target(y_i, y_j, block.pu, lam, cfg.mode)
    return MixOutcome(mode=cfg.mode, mask=block.mask, lam=lam, pu=block.pu,
                      perm=perm, w_target=w, y_target=y)


def apply_mix(activation: Tensor, outcome: MixOutcome) -> Tensor:
    """Mix a batched activation per the planned event (differentiable)."""
    B = activation.shape[0]
    if activation.shape[1:] != outcome.mask.shape:
        raise ShapeError(f"apply_mix: activation {activation.shape[1:]} vs "
                         f"mask {outcome.mask.shape}")
    m = expand(reshape(Tensor(outcome.mask), (1,) + outcome.mask.shape),
               activation.shape)
    partner = index_select(activation, outcome.perm, axis=0)
    if outcome.mode == "hard":
        mixed = patchup_hard(activation, partner, m)
    else:
        mixed = patchup_soft(activation, partner, m, outcome.lam)
    outcome.mixed = mixed
    return mixed
