"""Domain types for patient cohorts: schema, records, normalization stats."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

HORIZON_HOURS = 24

# Sentinel cell values inside a categorical grid column. Regular cells hold
# the vocabulary index as a float.
PLACEHOLDER = -1.0    # missing with no training average to fall back on
OUT_OF_VOCAB = -2.0   # observed token not in the schema vocabulary


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "continuous" | "categorical"
    vocabulary: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise DataError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and not self.vocabulary:
            raise DataError(f"variable {self.name!r}: categorical without vocabulary")
        if self.kind == "continuous" and self.vocabulary:
            raise DataError(f"variable {self.name!r}: continuous with vocabulary")

    @property
    def encoded_width(self) -> int:
        return 1 if self.kind == "continuous" else len(self.vocabulary)


class VariableSchema:
    """Ordered variable list with the raw-to-encoded column mapping."""

    def __init__(self, variables: list[Variable]):
        if not variables:
            raise DataError("schema: empty variable list")
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DataError("schema: duplicate variable names")
        self.variables = tuple(variables)
        self._index = {v.name: i for i, v in enumerate(variables)}
        self.column_ranges: list[tuple[int, int]] = []
        start = 0
        for v in variables:
            self.column_ranges.append((start, start + v.encoded_width))
            start += v.encoded_width
        self.encoded_width = start

    @property
    def n_raw(self) -> int:
        return len(self.variables)

    def index_of(self, name: str) -> int:
        if name not in self._index:
            raise DataError(f"schema: unknown variable {name!r}")
        return self._index[name]

    def to_dict(self) -> dict:
        return {"variables": [
            {"name": v.name, "kind": v.kind,
             **({"vocabulary": list(v.vocabulary)} if v.kind == "categorical" else {})}
            for v in self.variables]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VariableSchema":
        try:
            entries = d["variables"]
        except (KeyError, TypeError):
            raise DataError("schema: missing 'variables' list") from None
        return cls([Variable(name=e["name"], kind=e["kind"],
                             vocabulary=tuple(e.get("vocabulary", ())))
                    for e in entries])

    @classmethod
    def from_json(cls, blob: str) -> "VariableSchema":
        return cls.from_dict(json.loads(blob))


@dataclass
class PatientRecord:
    """One patient: an hourly value grid, its missingness mask, and the label.

    grid is T x V over raw variables; categorical cells hold vocabulary
    indices as floats. missing is True where no value was observed.
    """

    patient_id: str
    grid: np.ndarray
    missing: np.ndarray
    label: int

    def __post_init__(self):
        if self.grid.shape != self.missing.shape:
            raise DataError(f"record {self.patient_id!r}: grid {self.grid.shape} "
                            f"vs mask {self.missing.shape}")
        if self.label not in (0, 1):
            raise DataError(f"record {self.patient_id!r}: label must be 0 or 1")


@dataclass
class CohortStats:
    """Training-split statistics used by imputation and normalization.

    impute_avg has one entry per raw variable (None when nothing was ever
    observed, or for categorical variables); enc_mean/enc_std have one entry
    per encoded column and are identity (0, 1) on one-hot columns.
    """

    impute_avg: list[float | None]
    enc_mean: np.ndarray
    enc_std: np.ndarray

    def to_dict(self, schema: VariableSchema) -> dict:
        return {
            "impute_avg": {v.name: self.impute_avg[i]
                           for i, v in enumerate(schema.variables)},
            "enc_mean": self.enc_mean.tolist(),
            "enc_std": self.enc_std.tolist(),
        }

    def to_json(self, schema: VariableSchema) -> str:
        return json.dumps(self.to_dict(schema), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict, schema: VariableSchema) -> "CohortStats":
        avg_map = d["impute_avg"]
        return cls(
            impute_avg=[avg_map.get(v.name) for v in schema.variables],
            enc_mean=np.asarray(d["enc_mean"], dtype=np.float64),
            enc_std=np.asarray(d["enc_std"], dtype=np.float64),
        )
