"""HTTP facade over the experiment commands.

Endpoints are synchronous: each request runs one command to completion and
returns its summary. Precondition failures (bad config, missing data,
checkpoint mismatch) map to 422; mid-run failures map to 500. A gradient-check
that completes but finds errors is a 200 whose body says passed=false.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CheckpointError, ConfigError, DataError, VitalseqError
from ..harness import (
    cmd_cross_validate, cmd_evaluate, cmd_gradcheck, cmd_preprocess,
    cmd_synth, cmd_train, run_ablation,
)
from .schemas import (
    AblationResponse, CrossValidateRequest, CrossValidateResponse,
    EvaluateRequest, EvaluateResponse, GradcheckRequest, GradcheckResponse,
    HealthResponse, PreprocessResponse, RunRequest, SynthResponse,
    TrainResponse,
)

_PRECONDITION = (ConfigError, DataError, CheckpointError)


def create_app() -> FastAPI:
    app = FastAPI(title="vitalseq", version=__version__)

    @app.exception_handler(VitalseqError)
    def _domain_error(request: Request, exc: VitalseqError):
        status = 422 if isinstance(exc, _PRECONDITION) else 500
        return JSONResponse(status_code=status,
                            content={"detail": str(exc),
                                     "error": type(exc).__name__})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: RunRequest) -> SynthResponse:
        return SynthResponse(**cmd_synth(req.config))

    @app.post("/preprocess", response_model=PreprocessResponse)
    def preprocess(req: RunRequest) -> PreprocessResponse:
        return PreprocessResponse(**cmd_preprocess(req.config))

    @app.post("/train", response_model=TrainResponse)
    def train(req: RunRequest) -> TrainResponse:
        return TrainResponse(**cmd_train(req.config))

    @app.post("/cross-validate",
              response_model=CrossValidateResponse | AblationResponse)
    def cross_validate(req: CrossValidateRequest):
        if req.ablation:
            return AblationResponse(**run_ablation(req.config))
        return CrossValidateResponse(**cmd_cross_validate(req.config))

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        return EvaluateResponse(**cmd_evaluate(req.config, req.checkpoint))

    @app.post("/gradcheck", response_model=GradcheckResponse)
    def gradcheck(req: GradcheckRequest) -> GradcheckResponse:
        return GradcheckResponse(
            **cmd_gradcheck(req.config, seeds=req.seeds, corrupt=req.corrupt))

    return app
