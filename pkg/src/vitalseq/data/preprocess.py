"""Preprocessing pipeline: discretize, impute, encode, normalize.

Order is impute, then encode, then normalize; the -1 placeholder is inserted
before normalization. Statistics always come from a training split, so
held-out folds never influence them.
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .schema import (
    HORIZON_HOURS, OUT_OF_VOCAB, PLACEHOLDER, CohortStats, PatientRecord,
    VariableSchema,
)

STD_FLOOR = 1e-6


def discretize(patient_id: str, events, schema: VariableSchema, label: int,
               horizon: int = HORIZON_HOURS) -> PatientRecord:
    """Bucket a timestamped event stream into an hourly grid.

    ``events`` yields (hour: float, variable: str, value) tuples; the last
    event inside an hour wins. Categorical values are stored as vocabulary
    indices (OUT_OF_VOCAB for unlisted tokens); unknown variable names and
    out-of-range timestamps are errors.
    """
    grid = np.zeros((horizon, schema.n_raw), dtype=np.float64)
    missing = np.ones((horizon, schema.n_raw), dtype=bool)
    last_time = np.full((horizon, schema.n_raw), -np.inf)
    for t, name, value in events:
        t = float(t)
        if t < 0:
            raise DataError(f"discretize: negative timestamp {t} for {patient_id!r}")
        if t >= horizon:
            raise DataError(f"discretize: timestamp {t} beyond horizon {horizon}")
        col = schema.index_of(name)
        hour = int(t)
        if t < last_time[hour, col]:  # stable: equal-time later events still win
            continue
        var = schema.variables[col]
        if var.kind == "categorical":
            token = str(value)
            cell = float(var.vocabulary.index(token)) if token in var.vocabulary else OUT_OF_VOCAB
        else:
            cell = float(value)
        grid[hour, col] = cell
        missing[hour, col] = False
        last_time[hour, col] = t
    return PatientRecord(patient_id=patient_id, grid=grid, missing=missing, label=label)


def forward_impute(record: PatientRecord, stats: CohortStats) -> PatientRecord:
    """Fill missing cells: carry the last observed value forward; leading gaps
    take the training average, or -1 when no average exists."""
    T, V = record.grid.shape
    if len(stats.impute_avg) != V:
        raise DataError(f"forward_impute: stats cover {len(stats.impute_avg)} "
                        f"variables, record has {V}")
    grid = record.grid.copy()
    for v in range(V):
        fallback = stats.impute_avg[v]
        fill = PLACEHOLDER if fallback is None else float(fallback)
        have_seen = False
        for t in range(T):
            if record.missing[t, v]:
                grid[t, v] = grid[t - 1, v] if have_seen else fill
            else:
                have_seen = True
    return PatientRecord(patient_id=record.patient_id, grid=grid,
                         missing=record.missing.copy(), label=record.label)


def _encode_raw(record: PatientRecord, schema: VariableSchema,
                report: list[str] | None = None) -> np.ndarray:
    """Expand categorical columns to one-hot groups, no normalization yet."""
    T, V = record.grid.shape
    if V != schema.n_raw:
        raise DataError(f"encode: record has {V} variables, schema {schema.n_raw}")
    out = np.zeros((T, schema.encoded_width), dtype=np.float64)
    for v, (lo, hi) in enumerate(schema.column_ranges):
        var = schema.variables[v]
        col = record.grid[:, v]
        if var.kind == "continuous":
            out[:, lo] = col
            continue
        for t in range(T):
            idx = col[t]
            if idx >= 0 and float(idx).is_integer() and int(idx) < len(var.vocabulary):
                out[t, lo + int(idx)] = 1.0
            elif idx == OUT_OF_VOCAB and report is not None:
                report.append(f"{record.patient_id}: hour {t} variable "
                              f"{var.name!r}: category outside vocabulary, "
                              "encoded as zero group")
            # placeholder and out-of-vocab rows stay all-zero
    return out


def encode_and_normalize(record: PatientRecord, schema: VariableSchema,
                         stats: CohortStats,
                         report: list[str] | None = None) -> np.ndarray:
    """One-hot expansion plus z-normalization of the continuous columns.

    One-hot groups keep their raw bits; each continuous column maps to
    (x - mean) / max(std, 1e-6) with training-split statistics.
    """
    enc = _encode_raw(record, schema, report)
    if stats.enc_mean.shape != (schema.encoded_width,):
        raise DataError(f"encode: stats cover {stats.enc_mean.shape[0]} columns, "
                        f"schema encodes {schema.encoded_width}")
    cont = _continuous_mask(schema)
    denom = np.maximum(stats.enc_std, STD_FLOOR)
    enc[:, cont] = (enc[:, cont] - stats.enc_mean[cont]) / denom[cont]
    return enc


def denormalize(matrix: np.ndarray, schema: VariableSchema,
                stats: CohortStats) -> np.ndarray:
    """Invert the z-normalization of encode_and_normalize."""
    out = matrix.copy()
    cont = _continuous_mask(schema)
    denom = np.maximum(stats.enc_std, STD_FLOOR)
    out[:, cont] = out[:, cont] * denom[cont] + stats.enc_mean[cont]
    return out


def _continuous_mask(schema: VariableSchema) -> np.ndarray:
    mask = np.zeros(schema.encoded_width, dtype=bool)
    for v, (lo, hi) in enumerate(schema.column_ranges):
        if schema.variables[v].kind == "continuous":
            mask[lo] = True
    return mask


def fit_cohort_stats(train_records: list[PatientRecord],
                     schema: VariableSchema) -> CohortStats:
    """Fit imputation averages and normalization stats on a training split.

    Pass one averages the observed cells of each continuous variable; pass
    two imputes and encodes the training records with those averages and
    takes per-column mean/std. One-hot columns get identity stats (0, 1).
    """
    if not train_records:
        raise DataError("fit_cohort_stats: empty training split")
    V = schema.n_raw
    impute_avg: list[float | None] = []
    for v in range(V):
        if schema.variables[v].kind == "categorical":
            impute_avg.append(None)  # index averages are meaningless
            continue
        vals = [r.grid[r.missing[:, v] == False, v] for r in train_records]  # noqa: E712
        allv = np.concatenate(vals) if vals else np.empty(0)
        impute_avg.append(float(allv.mean()) if allv.size else None)

    stats0 = CohortStats(impute_avg=impute_avg,
                         enc_mean=np.zeros(schema.encoded_width),
                         enc_std=np.ones(schema.encoded_width))
    stacked = np.concatenate([
        _encode_raw(forward_impute(r, stats0), schema) for r in train_records
    ], axis=0)
    enc_mean = np.zeros(schema.encoded_width)
    enc_std = np.ones(schema.encoded_width)
    cont = _continuous_mask(schema)
    enc_mean[cont] = stacked[:, cont].mean(axis=0)
    enc_std[cont] = stacked[:, cont].std(axis=0)
    return CohortStats(impute_avg=impute_avg, enc_mean=enc_mean, enc_std=enc_std)


def preprocess_cohort(records: list[PatientRecord], schema: VariableSchema,
                      stats: CohortStats,
                      report: list[str] | None = None) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Impute, encode and normalize a record list with fixed statistics.

    Returns (X, y, patient_ids) with X of shape (n, T, encoded_width).
    """
    xs, ys, ids = [], [], []
    for r in records:
        dense = forward_impute(r, stats)
        xs.append(encode_and_normalize(dense, schema, stats, report))
        ys.append(r.label)
        ids.append(r.patient_id)
    return np.stack(xs), np.asarray(ys, dtype=np.int64), ids
