"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..harness import RunConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class RunRequest(BaseModel):
    config: RunConfig


class CrossValidateRequest(BaseModel):
    config: RunConfig
    ablation: bool = False


class EvaluateRequest(BaseModel):
    config: RunConfig
    checkpoint: str


class GradcheckRequest(BaseModel):
    config: RunConfig
    seeds: int = Field(default=20, ge=1)
    corrupt: str | None = None   # fault-injection diagnostic


class SynthResponse(BaseModel):
    out: str
    n_patients: int
    n_positive: int
    files: list[str]


class PreprocessResponse(BaseModel):
    out: str
    shape: list[int]
    n_positive: int
    fingerprint: str


class TrainResponse(BaseModel):
    out: str
    fingerprint: str
    checkpoint: str
    train_metrics: dict


class EvaluateResponse(BaseModel):
    out: str
    fingerprint: str
    eval: dict


class CrossValidateResponse(BaseModel):
    out: str
    fingerprint: str
    metrics: dict
    table: str


class AblationResponse(BaseModel):
    out: str
    table: str
    arms: dict


class GradcheckResponse(BaseModel):
    passed: bool
    threshold: float
    duration_s: float
    checks: list[dict]
    summary: str
