"""File formats: long-format event CSV, labels, schema JSON, cohort containers.

Floats are written with ``repr`` so a CSV round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .preprocess import discretize
from .schema import CohortStats, PatientRecord, VariableSchema

EVENTS_HEADER = ["patient_id", "hour", "variable", "value"]
LABELS_HEADER = ["patient_id", "label"]


def write_events_csv(path, records: list[PatientRecord], schema: VariableSchema) -> None:
    """Emit each observed grid cell as one event at the half-hour mark."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENTS_HEADER)
        for r in records:
            T, V = r.grid.shape
            for t in range(T):
                for v in range(V):
                    if r.missing[t, v]:
                        continue
                    var = schema.variables[v]
                    if var.kind == "categorical":
                        value = var.vocabulary[int(r.grid[t, v])]
                    else:
                        value = repr(float(r.grid[t, v]))
                    w.writerow([r.patient_id, repr(t + 0.5), var.name, value])


def write_labels_csv(path, records: list[PatientRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LABELS_HEADER)
        for r in records:
            w.writerow([r.patient_id, r.label])


def write_schema_json(path, schema: VariableSchema) -> None:
    Path(path).write_text(schema.to_json())


def read_schema_json(path) -> VariableSchema:
    return VariableSchema.from_json(Path(path).read_text())


def read_labels_csv(path) -> dict[str, int]:
    labels: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LABELS_HEADER:
            raise DataError(f"labels csv: expected header {LABELS_HEADER}, got {header}")
        for row in reader:
            if len(row) != 2:
                raise DataError(f"labels csv: malformed row {row}")
            labels[row[0]] = int(row[1])
    return labels


def load_cohort(events_path, labels_path, schema_path,
                horizon: int = 24) -> tuple[list[PatientRecord], VariableSchema]:
    """Read events + labels + schema and discretize into patient records.

    Patients appear in labels-file order; a labeled patient with no events
    gets an all-missing grid.
    """
    schema = read_schema_json(schema_path)
    labels = read_labels_csv(labels_path)
    events: dict[str, list] = {pid: [] for pid in labels}
    with open(events_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENTS_HEADER:
            raise DataError(f"events csv: expected header {EVENTS_HEADER}, got {header}")
        for row in reader:
            if len(row) != 4:
                raise DataError(f"events csv: malformed row {row}")
            pid, hour, variable, value = row
            if pid not in labels:
                raise DataError(f"events csv: patient {pid!r} has no label")
            events[pid].append((float(hour), variable, value))
    return [discretize(pid, events[pid], schema, labels[pid], horizon=horizon)
            for pid in labels], schema


def save_matrix_npz(path, X: np.ndarray, y: np.ndarray, patient_ids: list[str]) -> None:
    np.savez(path, X=X, y=y, patient_ids=np.asarray(patient_ids, dtype=np.str_))


def load_matrix_npz(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    with np.load(path, allow_pickle=False) as z:
        return z["X"], z["y"], [str(s) for s in z["patient_ids"]]


def save_matrix_csv_dir(outdir, X: np.ndarray, y: np.ndarray,
                        patient_ids: list[str]) -> None:
    """One CSV matrix per patient plus an index file with the labels."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LABELS_HEADER)
        for pid, label in zip(patient_ids, y):
            w.writerow([pid, int(label)])
    for pid, mat in zip(patient_ids, X):
        with open(outdir / f"{pid}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            for row in mat:
                w.writerow([repr(float(x)) for x in row])


def write_stats_json(path, stats: CohortStats, schema: VariableSchema) -> None:
    Path(path).write_text(stats.to_json(schema))


def read_stats_json(path, schema: VariableSchema) -> CohortStats:
    return CohortStats.from_dict(json.loads(Path(path).read_text()), schema)
