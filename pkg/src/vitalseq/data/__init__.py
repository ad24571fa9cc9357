"""Patient cohort ingestion, preprocessing, synthesis and fold planning."""

from .folds import FoldPlan, stratified_kfold
from .io import (
    load_cohort,
    load_matrix_npz,
    read_labels_csv,
    read_schema_json,
    read_stats_json,
    save_matrix_csv_dir,
    save_matrix_npz,
    write_events_csv,
    write_labels_csv,
    write_schema_json,
    write_stats_json,
)
from .preprocess import (
    denormalize,
    discretize,
    encode_and_normalize,
    fit_cohort_stats,
    forward_impute,
    preprocess_cohort,
)
from .schema import (
    HORIZON_HOURS,
    OUT_OF_VOCAB,
    PLACEHOLDER,
    CohortStats,
    PatientRecord,
    Variable,
    VariableSchema,
)
from .synthetic import SyntheticSpec, generate_synthetic, synthetic_schema

__all__ = [
    "FoldPlan", "stratified_kfold",
    "load_cohort", "load_matrix_npz", "read_labels_csv", "read_schema_json",
    "read_stats_json", "save_matrix_csv_dir", "save_matrix_npz",
    "write_events_csv", "write_labels_csv", "write_schema_json", "write_stats_json",
    "denormalize", "discretize", "encode_and_normalize", "fit_cohort_stats",
    "forward_impute", "preprocess_cohort",
    "HORIZON_HOURS", "OUT_OF_VOCAB", "PLACEHOLDER", "CohortStats",
    "PatientRecord", "Variable", "VariableSchema",
    "SyntheticSpec", "generate_synthetic", "synthetic_schema",
]
