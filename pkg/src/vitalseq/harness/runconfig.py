"""Run configuration: one JSON-serializable object that fully determines a
training, cross-validation, evaluation, or gradient-check run."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from pydantic import BaseModel, Field, model_validator

from ..data import SyntheticSpec
from ..errors import ConfigError
from ..mixing import PatchUpConfig
from ..model import ModelConfig, desk_config
from ..training import LossToggles


class OptimizerSpec(BaseModel, frozen=True):
    kind: str = "sgd"
    lr: float = Field(default=0.05, gt=0.0)
    epochs: int = Field(default=30, ge=1)
    batch_size: int = Field(default=32, ge=1)

    @model_validator(mode="after")
    def _kind(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"optimizer kind must be 'sgd' or 'adam', got {self.kind!r}")
        return self


class DataSpec(BaseModel, frozen=True):
    """Where the cohort comes from: a generator spec or a CSV directory
    holding events.csv, labels.csv, and schema.json."""

    source: str = "synthetic"
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    csv_dir: str | None = None

    @model_validator(mode="after")
    def _wired(self):
        if self.source not in ("synthetic", "csv"):
            raise ValueError(f"data source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.csv_dir:
            raise ValueError("data source 'csv' needs csv_dir")
        return self


class RunConfig(BaseModel):
    """Everything a run depends on; the seed plus this object fully
    determine every artifact a command writes."""

    seed: int = 0
    out: str | None = None
    model: ModelConfig = Field(default_factory=desk_config)
    patchup: PatchUpConfig = Field(default_factory=PatchUpConfig)
    toggles: LossToggles = Field(default_factory=LossToggles)
    optimizer: OptimizerSpec = Field(default_factory=OptimizerSpec)
    # variable count matches the default model's encoded width
    data: DataSpec = Field(default_factory=lambda: DataSpec(
        synthetic=SyntheticSpec(n_variables=64)))
    folds: int = Field(default=10, ge=2)
    threshold: float = Field(default=0.5, gt=0.0, lt=1.0)
    centers_warmup: int = Field(default=100, ge=0)
    parallel: bool = False

    @model_validator(mode="after")
    def _consistent(self):
        if self.data.source == "synthetic" and \
                self.data.synthetic.n_variables != self.model.encoded_width:
            raise ValueError(
                f"synthetic n_variables {self.data.synthetic.n_variables} must match "
                f"model encoded_width {self.model.encoded_width}")
        if self.data.source == "csv" and not Path(self.data.csv_dir).is_dir():
            raise ValueError(f"csv_dir does not exist: {self.data.csv_dir}")
        return self

    def fingerprint(self) -> str:
        """Digest of the run-defining fields; output location and execution
        mode are excluded because they cannot change any computed number."""
        payload = self.model_dump(mode="json", exclude={"out", "parallel"})
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def out_dir(self) -> Path:
        if not self.out:
            raise ConfigError("this command writes artifacts; set an output "
                              "directory (config 'out' or --out)")
        return Path(self.out)


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config file and apply flat field overrides on top."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return RunConfig.model_validate(raw)
