"""Loss suite: banded cross-entropy, class centers, gradient attention, and
the attention-weighted center-distance loss.

The band rule: a log-probability term enters the loss only while its
probability lies in [0.25, 0.75]; confident samples, right or wrong, are
zeroed out (a literal reading of the clip definition). The band indicator is
a constant during differentiation, as are the class centers and the
normalized attention weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, abs_, clamp, log, mean, sum_
from .errors import ConfigError, NonFiniteError, ShapeError

BAND_LO = 0.25
BAND_HI = 0.75
LOG_BAND_LO = math.log(BAND_LO)
LOG_BAND_HI = math.log(BAND_HI)
PROB_EPS = 1e-7


def clip(x):
    """Pass x through when exp(x) lies in [0.25, 0.75], else 0 (inclusive)."""
    arr = np.asarray(x, dtype=np.float64)
    inside = (arr >= LOG_BAND_LO) & (arr <= LOG_BAND_HI)
    out = np.where(inside, arr, 0.0)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def clip_bce(labels, probs: Tensor) -> Tensor:
    """Band-limited binary cross-entropy, averaged over the batch.

    Per sample: y * clip(log p) + (1 - y) * clip(log(1 - p)), negated. Since
    exp(log(1 - p)) = 1 - p, both terms share one band indicator,
    p in [0.25, 0.75]; the indicator is constant under differentiation, so
    gradient flows only through in-band samples.
    """
    y = np.asarray(labels, dtype=np.float64)
    if y.size == 0:
        raise ShapeError("clip_bce: empty batch")
    if y.shape != probs.shape:
        raise ShapeError(f"clip_bce: labels {y.shape} vs probs {probs.shape}")
    p = clamp(probs, PROB_EPS, 1.0 - PROB_EPS)
    band = ((p.data >= BAND_LO) & (p.data <= BAND_HI)).astype(np.float64)
    y_t = Tensor(y)
    band_t = Tensor(band)
    term = y_t * (band_t * log(p)) + (1.0 - y_t) * (band_t * log(1.0 - p))
    return -mean(term)


@dataclass
class ClassCenters:
    """Per-class mean feature maps with warmup-then-running-mean updates."""

    m0: np.ndarray
    m1: np.ndarray
    n0: float = 0.0
    n1: float = 0.0
    warmup_iters: int = 100

    @classmethod
    def zeros(cls, feature_shape: tuple[int, ...], warmup_iters: int = 100) -> "ClassCenters":
        return cls(m0=np.zeros(feature_shape), m1=np.zeros(feature_shape),
                   warmup_iters=warmup_iters)


def update_centers(centers: ClassCenters, features: np.ndarray, labels,
                   iteration: int) -> ClassCenters:
    """New centers after one batch.

    Below warmup_iters each batch overwrites the centers with its own
    per-class means (absent class keeps zeros) and counts stay 0; afterwards
    the centers become count-weighted running means over post-warmup batches.
    """
    y = np.asarray(labels)
    if features.ndim < 2 or features.shape[0] != y.shape[0]:
        raise ShapeError(f"update_centers: features {features.shape} vs "
                         f"labels {y.shape}")
    out = ClassCenters(m0=centers.m0.copy(), m1=centers.m1.copy(),
                       n0=centers.n0, n1=centers.n1,
                       warmup_iters=centers.warmup_iters)
    warm = iteration < centers.warmup_iters
    for cls_value in (0, 1):
        sel = features[y == cls_value]
        name_m, name_n = ("m0", "n0") if cls_value == 0 else ("m1", "n1")
        if warm:
            setattr(out, name_m, sel.mean(axis=0) if len(sel)
                    else np.zeros_like(centers.m0))
            setattr(out, name_n, 0.0)
        elif len(sel):
            n_old = getattr(out, name_n)
            m_old = getattr(out, name_m) if n_old > 0 else np.zeros_like(centers.m0)
            n_new = n_old + len(sel)
            setattr(out, name_m, (m_old * n_old + sel.sum(axis=0)) / n_new)
            setattr(out, name_n, n_new)
    return out


def attention_from_gradient(raw_grad: np.ndarray) -> np.ndarray:
    """Per-sample min-max normalization of a hooked gradient to [0, 1];
    a constant row maps to all zeros."""
    g = np.asarray(raw_grad, dtype=np.float64)
    if g.ndim < 2:
        raise ShapeError(f"attention_from_gradient: need a batch axis, got {g.shape}")
    flat = g.reshape(g.shape[0], -1)
    lo = flat.min(axis=1, keepdims=True)
    hi = flat.max(axis=1, keepdims=True)
    span = hi - lo
    safe = np.where(span == 0.0, 1.0, span)
    out = np.where(span == 0.0, 0.0, (flat - lo) / safe)
    return out.reshape(g.shape)


def cc_loss(f: Tensor, labels, centers: ClassCenters, G: np.ndarray) -> Tensor:
    """Attention-weighted distance of each feature map to its class center:
    (1/N) sum_i sum(|f_i - m_{y_i}| * G_i); centers and G are constants."""
    y = np.asarray(labels)
    if f.shape != G.shape:
        raise ShapeError(f"cc_loss: features {f.shape} vs attention {G.shape}")
    if np.any(G < 0.0) or np.any(G > 1.0):
        raise ConfigError("cc_loss: attention weights outside [0, 1]")
    target = np.where((y == 1).reshape(-1, *([1] * (f.ndim - 1))),
                      centers.m1, centers.m0)
    weighted = abs_(f - Tensor(target)) * Tensor(G)
    per_sample = sum_(weighted, axis=tuple(range(1, f.ndim)))
    return mean(per_sample)


@dataclass(frozen=True)
class LossBreakdown:
    clip_bce: float
    patchup: float
    cc: float
    total: float

    def to_dict(self) -> dict:
        return {"clip_bce": self.clip_bce, "patchup": self.patchup,
                "cc": self.cc, "total": self.total}


def total_loss(clip_part: Tensor | None, patchup_part: Tensor | None,
               cc_part: Tensor | None) -> tuple[Tensor, LossBreakdown]:
    """Unweighted sum of the enabled parts; disabled parts contribute exactly
    0 and add no graph nodes, so an enabled-only configuration is bit-identical
    to never constructing the others."""
    parts = [p for p in (clip_part, patchup_part, cc_part) if p is not None]
    if not parts:
        raise ConfigError("total_loss: every loss part is disabled")
    for p in parts:
        if not np.all(np.isfinite(p.data)):
            raise NonFiniteError("total_loss: non-finite loss part")
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    breakdown = LossBreakdown(
        clip_bce=0.0 if clip_part is None else float(clip_part.data),
        patchup=0.0 if patchup_part is None else float(patchup_part.data),
        cc=0.0 if cc_part is None else float(cc_part.data),
        total=float(total.data),
    )
    return total, breakdown
