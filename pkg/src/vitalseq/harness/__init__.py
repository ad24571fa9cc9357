"""Experiment harness: run configuration, command implementations, artifact
writers, and the gradient-check suite."""

from .artifacts import ablation_table, stable_json, write_json, write_manifest, write_text
from .experiments import (
    ABLATION_ARMS, cmd_cross_validate, cmd_evaluate, cmd_gradcheck,
    cmd_preprocess, cmd_synth, cmd_train, run_ablation,
)
from .gradsuite import SuiteCheck, SuiteReport, op_case, run_gradcheck_suite
from .runconfig import DataSpec, OptimizerSpec, RunConfig, load_run_config

__all__ = [
    "ABLATION_ARMS",
    "DataSpec",
    "OptimizerSpec",
    "RunConfig",
    "SuiteCheck",
    "SuiteReport",
    "ablation_table",
    "cmd_cross_validate",
    "cmd_evaluate",
    "cmd_gradcheck",
    "cmd_preprocess",
    "cmd_synth",
    "cmd_train",
    "load_run_config",
    "op_case",
    "run_ablation",
    "run_gradcheck_suite",
    "stable_json",
    "write_json",
    "write_manifest",
    "write_text",
]
