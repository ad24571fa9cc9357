"""Stratified cross-validation fold assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray  # sample index -> fold id
    seed: int

    def val_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def stratified_kfold(labels, k: int, seed: int) -> FoldPlan:
    """Assign samples to k folds, balancing each class and the totals.

    Each class is shuffled and dealt round-robin; the deal position carries
    over between classes, so per-class fold counts differ by at most 1 and so
    do overall fold sizes.
    """
    labels = np.asarray(labels)
    n = labels.size
    if k < 2:
        raise DataError(f"stratified_kfold: k must be >= 2, got {k}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    start = 0
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise DataError(f"stratified_kfold: class {cls} has {idx.size} "
                            f"members, fewer than k={k}")
        idx = rng.permutation(idx)
        for j, sample in enumerate(idx):
            assignment[sample] = (start + j) % k
        start = (start + idx.size) % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)
