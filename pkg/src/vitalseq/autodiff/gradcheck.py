"""Finite-difference verification of analytic gradients.

Central differences (f(x+h) - f(x-h)) / 2h against the reverse-mode gradient,
compared per coordinate with a relative error that is safe near zero:

    rel = |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)

A check passes when the worst coordinate stays under the threshold. Large
inputs may be subsampled (``max_coords`` per input) so that end-to-end checks
on full models stay tractable; subsampled coordinates are chosen with a seeded
RNG so reports are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor, zero_grads


@dataclass
class GradCheckReport:
    """Outcome of one gradient check: worst relative error per input."""

    passed: bool
    max_rel_error: float
    threshold: float
    per_input: list[dict] = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_error={self.max_rel_error:.3e} threshold={self.threshold:.1e}"


def grad_check(fn, inputs: list[Tensor], step: float = 1e-5,
               threshold: float = 1e-4, max_coords: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare reverse-mode gradients of ``fn(*inputs)`` with central differences.

    ``fn`` must return a scalar Tensor. Inputs with ``requires_grad=False``
    are held fixed. When ``max_coords`` is given, at most that many
    coordinates per input are probed (all of them if the input is smaller).
    """
    out = fn(*inputs)
    if out.size != 1:
        raise ValueError(f"grad_check: fn must return a scalar, got shape {out.shape}")
    zero_grads(out)
    out = fn(*inputs)
    out.backward()
    analytic = []
    for t in inputs:
        analytic.append(None if not t.requires_grad
                        else (np.zeros_like(t.data) if t.grad is None else t.grad.copy()))
    zero_grads(out)

    rng = np.random.default_rng(seed)
    per_input = []
    worst = 0.0
    for idx, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        flat = t.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = np.arange(n)
        a_flat = analytic[idx].reshape(-1)
        rows = []
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            f_plus = fn(*inputs).item()
            flat[c] = orig - step
            f_minus = fn(*inputs).item()
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = float(a_flat[c])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            rows.append((int(c), a, numeric, rel))
        max_rel = max((r[3] for r in rows), default=0.0)
        worst = max(worst, max_rel)
        worst_row = max(rows, key=lambda r: r[3]) if rows else None
        per_input.append({
            "input": idx,
            "shape": t.shape,
            "coords_checked": len(rows),
            "max_rel_error": max_rel,
            "worst_coord": None if worst_row is None else {
                "flat_index": worst_row[0],
                "analytic": worst_row[1],
                "numeric": worst_row[2],
                "rel_error": worst_row[3],
            },
        })

    return GradCheckReport(passed=worst < threshold, max_rel_error=worst,
                           threshold=threshold, per_input=per_input)
