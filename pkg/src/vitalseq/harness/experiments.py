"""Command implementations behind the service endpoints and the CLI.

Every command is a pure function of its RunConfig: the global seed plus the
config fully determine all outputs, and random streams for each fold are
derived from (seed, fold, purpose) so folds are independent of execution
order and of the parallel flag.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..data import (
    CohortStats, PatientRecord, VariableSchema, fit_cohort_stats,
    generate_synthetic, load_cohort, preprocess_cohort, read_stats_json,
    save_matrix_npz, stratified_kfold, write_events_csv, write_labels_csv,
    write_schema_json, write_stats_json,
)
from ..errors import ConfigError, DataError
from ..losses import ClassCenters
from ..metrics import MetricsReport, aggregate_folds, confusion_at, fold_metrics
from ..model import Params, init_params, load_checkpoint, save_checkpoint
from ..training import LossToggles, OptimState, TrainState, predict, train_epochs
from .artifacts import ablation_table, stable_json, write_json, write_manifest, write_text
from .gradsuite import run_gradcheck_suite
from .runconfig import RunConfig

# purpose offsets for derived random streams
_INIT, _SHUFFLE, _MIX = 0, 1, 2


def _stream_seed(seed: int, fold_tag: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, fold_tag, purpose])


def _init_seed(seed: int, fold_tag: int) -> int:
    return int(_stream_seed(seed, fold_tag, _INIT).generate_state(1)[0])


def _load_records(config: RunConfig) -> tuple[list[PatientRecord], VariableSchema]:
    if config.data.source == "synthetic":
        records, schema = generate_synthetic(config.data.synthetic)
    else:
        base = Path(config.data.csv_dir)
        records, schema = load_cohort(base / "events.csv", base / "labels.csv",
                                      base / "schema.json",
                                      horizon=config.model.hours)
    if schema.encoded_width != config.model.encoded_width:
        raise ConfigError(
            f"cohort encodes to width {schema.encoded_width} but the model "
            f"expects {config.model.encoded_width}")
    return records, schema


def _train_one(config: RunConfig, train_records: list[PatientRecord],
               schema: VariableSchema, fold_tag: int,
               trace_path: Path | None) -> tuple[Params, CohortStats]:
    """Fit stats on the given records only, then train one model on them."""
    stats = fit_cohort_stats(train_records, schema)
    X, y, _ = preprocess_cohort(train_records, schema, stats)
    params = init_params(config.model, seed=_init_seed(config.seed, fold_tag))
    opt = OptimState(kind=config.optimizer.kind, lr=config.optimizer.lr)
    state = TrainState(
        optim=opt,
        centers=ClassCenters.zeros((config.model.feature_width,),
                                   warmup_iters=config.centers_warmup)
        if config.toggles.cc else None,
        mix_rng=np.random.default_rng(_stream_seed(config.seed, fold_tag, _MIX))
        if config.toggles.patchup else None,
    )
    shuffle_rng = np.random.default_rng(_stream_seed(config.seed, fold_tag, _SHUFFLE))
    fh = open(trace_path, "w") if trace_path is not None else None
    try:
        train_epochs(params, config.model, X, y, state, config.toggles,
                     config.patchup if config.toggles.patchup else None,
                     epochs=config.optimizer.epochs,
                     batch_size=config.optimizer.batch_size,
                     shuffle_rng=shuffle_rng, trace_fh=fh)
    finally:
        if fh is not None:
            fh.close()
    return params, stats


def cmd_synth(config: RunConfig) -> dict:
    """Write a synthetic cohort (events, labels, schema) to the out dir."""
    if config.data.source != "synthetic":
        raise ConfigError("synth needs a synthetic data spec")
    out = config.out_dir()
    records, schema = generate_synthetic(config.data.synthetic)
    out.mkdir(parents=True, exist_ok=True)
    write_events_csv(out / "events.csv", records, schema)
    write_labels_csv(out / "labels.csv", records)
    write_schema_json(out / "schema.json", schema)
    n_pos = sum(r.label for r in records)
    write_manifest(out, "synth", config.data.synthetic.seed,
                   ["events.csv", "labels.csv", "schema.json"],
                   extra={"n_patients": len(records), "n_positive": n_pos})
    return {"out": str(out), "n_patients": len(records), "n_positive": n_pos,
            "files": ["events.csv", "labels.csv", "manifest.json", "schema.json"]}


def cmd_preprocess(config: RunConfig) -> dict:
    """Discretize, impute, encode, and normalize a whole cohort to disk."""
    out = config.out_dir()
    records, schema = _load_records(config)
    stats = fit_cohort_stats(records, schema)
    X, y, ids = preprocess_cohort(records, schema, stats)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_npz(out / "matrix.npz", X, y, ids)
    write_stats_json(out / "stats.json", stats, schema)
    write_manifest(out, "preprocess", config.seed, ["matrix.npz", "stats.json"],
                   fingerprint=config.fingerprint(),
                   extra={"shape": list(X.shape)})
    return {"out": str(out), "shape": list(X.shape),
            "n_positive": int(np.sum(y)), "fingerprint": config.fingerprint()}


def _score_block(scores, labels, threshold: float) -> dict:
    cm = confusion_at(scores, labels, threshold)
    block = fold_metrics(scores, labels, threshold)
    block.update({"TP": cm.TP, "FP": cm.FP, "TN": cm.TN, "FN": cm.FN})
    return block


def cmd_train(config: RunConfig) -> dict:
    """Train one model on the full cohort; emit checkpoint, stats, trace,
    and training-set metrics."""
    out = config.out_dir()
    records, schema = _load_records(config)
    out.mkdir(parents=True, exist_ok=True)
    params, stats = _train_one(config, records, schema, fold_tag=0,
                               trace_path=out / "loss.jsonl")
    save_checkpoint(out / "checkpoint.npz", params, config.model)
    write_stats_json(out / "stats.json", stats, schema)
    X, y, _ = preprocess_cohort(records, schema, stats)
    scores = predict(params, config.model, X)
    metrics = _score_block(scores, y, config.threshold)
    write_json(out / "metrics.json",
               {"fingerprint": config.fingerprint(),
                "threshold": config.threshold, "train": metrics})
    write_manifest(out, "train", config.seed,
                   ["checkpoint.npz", "stats.json", "loss.jsonl", "metrics.json"],
                   fingerprint=config.fingerprint())
    return {"out": str(out), "fingerprint": config.fingerprint(),
            "checkpoint": str(out / "checkpoint.npz"), "train_metrics": metrics}


def cmd_evaluate(config: RunConfig, checkpoint: str) -> dict:
    """Score a cohort with a trained checkpoint and its frozen stats."""
    out = config.out_dir()
    ckpt_path = Path(checkpoint)
    params, model_config = load_checkpoint(ckpt_path,
                                           expected_config=config.model)
    records, schema = _load_records(config)
    if not records:
        raise DataError("evaluate: empty evaluation set")
    stats = read_stats_json(ckpt_path.parent / "stats.json", schema)
    X, y, ids = preprocess_cohort(records, schema, stats)
    scores = predict(params, model_config, X)
    metrics = _score_block(scores, y, config.threshold)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scores.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "score", "label"])
        for pid, s, lab in zip(ids, scores, y):
            writer.writerow([pid, repr(float(s)), int(lab)])
    write_json(out / "metrics.json",
               {"fingerprint": config.fingerprint(),
                "threshold": config.threshold, "eval": metrics})
    lines = [f"n = {len(y)}   threshold = {config.threshold:g}",
             f"TP {metrics['TP']}  FP {metrics['FP']}  "
             f"TN {metrics['TN']}  FN {metrics['FN']}"]
    for name in ("sensitivity", "specificity", "accuracy", "auroc"):
        val = metrics[name]
        lines.append(f"{name:<11}  " + ("undefined" if val is None else f"{val:.4f}"))
    write_text(out / "report.txt", "\n".join(lines) + "\n")
    write_manifest(out, "evaluate", config.seed,
                   ["metrics.json", "report.txt", "scores.csv"],
                   fingerprint=config.fingerprint())
    return {"out": str(out), "fingerprint": config.fingerprint(), "eval": metrics}


def _run_fold(config: RunConfig, records, schema, plan, fold: int,
              out: Path) -> dict:
    fold_dir = out / f"fold_{fold}"
    fold_dir.mkdir(parents=True, exist_ok=True)
    train_records = [records[i] for i in plan.train_indices(fold)]
    val_records = [records[i] for i in plan.val_indices(fold)]
    params, stats = _train_one(config, train_records, schema,
                               fold_tag=1 + fold,
                               trace_path=fold_dir / "loss.jsonl")
    write_stats_json(fold_dir / "stats.json", stats, schema)
    Xv, yv, _ = preprocess_cohort(val_records, schema, stats)
    scores = predict(params, config.model, Xv)
    metrics = fold_metrics(scores, yv, config.threshold)
    write_json(fold_dir / "metrics.json", metrics)
    return metrics


def cmd_cross_validate(config: RunConfig) -> dict:
    """Stratified k-fold run: per-fold leak-free stats, training, held-out
    scoring, and the aggregated mean ± std report."""
    out = config.out_dir()
    records, schema = _load_records(config)
    labels = np.array([r.label for r in records])
    plan = stratified_kfold(labels, config.folds, seed=config.seed)
    out.mkdir(parents=True, exist_ok=True)

    def run(fold: int) -> dict:
        try:
            return _run_fold(config, records, schema, plan, fold, out)
        except Exception as exc:
            raise RuntimeError(f"fold {fold} failed during training/scoring: "
                               f"{exc}") from exc

    if config.parallel:
        with ThreadPoolExecutor(max_workers=min(config.folds, 4)) as pool:
            per_fold = list(pool.map(run, range(config.folds)))
    else:
        per_fold = [run(fold) for fold in range(config.folds)]

    report = aggregate_folds(per_fold)
    write_text(out / "metrics.json", report.to_json())
    write_text(out / "report.txt", report.table())
    write_json(out / "per_fold.json", per_fold)
    write_manifest(out, "cross-validate", config.seed,
                   ["metrics.json", "report.txt", "per_fold.json"]
                   + [f"fold_{i}/metrics.json" for i in range(config.folds)],
                   fingerprint=config.fingerprint())
    return {"out": str(out), "fingerprint": config.fingerprint(),
            "metrics": report.to_dict(), "table": report.table()}


ABLATION_ARMS = ("baseline", "patchup-soft", "cc", "patchup-soft+cc")


def _arm_config(config: RunConfig, arm: str) -> RunConfig:
    toggles = LossToggles(clip_bce=True,
                          patchup=arm.startswith("patchup"),
                          cc=arm.endswith("cc"))
    update: dict = {"toggles": toggles,
                    "out": str(config.out_dir() / arm.replace("+", "_"))}
    if toggles.patchup:
        update["patchup"] = config.patchup.model_copy(update={"mode": "soft"})
    return config.model_copy(update=update)


def run_ablation(config: RunConfig) -> dict:
    """Cross-validate the four regularizer arms and emit one joint table."""
    rows: list[tuple[str, MetricsReport]] = []
    per_arm: dict[str, dict] = {}
    for arm in ABLATION_ARMS:
        result = cmd_cross_validate(_arm_config(config, arm))
        per_arm[arm] = result["metrics"]
        # re-aggregate from the emitted artifact; exercises its loadability
        per_fold = json.loads((Path(result["out"]) / "per_fold.json").read_text())
        rows.append((arm, aggregate_folds(per_fold)))
    table = ablation_table(rows)
    out = config.out_dir()
    write_text(out / "ablation.txt", table)
    write_json(out / "ablation.json", per_arm)
    return {"out": str(out), "table": table, "arms": per_arm}


def cmd_gradcheck(config: RunConfig, seeds: int = 20,
                  corrupt: str | None = None) -> dict:
    """Finite-difference audit; writes the report when an out dir is set."""
    report = run_gradcheck_suite(config.model, seeds=seeds, corrupt=corrupt)
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "gradcheck.json", report.to_dict())
    result = report.to_dict()
    result["summary"] = report.summary()
    return result
