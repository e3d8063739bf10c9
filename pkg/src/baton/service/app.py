"""FastAPI service wrapping the engine. Jobs run synchronously within the
request; FastAPI executes sync endpoints in its threadpool, so several jobs
can be in flight while each stays internally bounded by its backend limit.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__, jobs, reward
from ..errors import BatonError
from .models import (
    AnnotateDifficultyRequest,
    AnnotateDifficultyResponse,
    AnnotateStrategiesRequest,
    AnnotateStrategiesResponse,
    CostRow,
    CostSweepRequest,
    CostSweepResponse,
    DecodeRequest,
    DecodeResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    RolloutsRequest,
    RolloutsResponse,
    ScoreRequest,
    ScoreResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="baton", version=__version__)

    def fail(exc: Exception) -> HTTPException:
        return HTTPException(
            status_code=400, detail={"error": type(exc).__name__, "message": str(exc)}
        )

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/decode", response_model=DecodeResponse)
    def decode(req: DecodeRequest) -> DecodeResponse:
        manifest = {
            "decoder": req.decoder,
            "dataset": req.dataset,
            "budget": req.budget.model_dump(),
            "params": req.params.model_dump(),
            "samples": req.samples,
            "seed": req.seed,
            "backend": req.backend.to_spec(),
            "templates_dir": req.templates_dir,
            "summary_detail": req.summary_detail,
            "decoder_options": req.decoder_options,
        }
        try:
            report = jobs.run_decode(manifest, req.out_dir, concurrency=req.concurrency)
        except (BatonError, ValueError, KeyError) as exc:
            raise fail(exc) from exc
        return DecodeResponse(**report)

    @app.post("/v1/rollouts", response_model=RolloutsResponse)
    def rollouts_endpoint(req: RolloutsRequest) -> RolloutsResponse:
        request = req.model_dump()
        request["backend"] = req.backend.to_spec()
        try:
            report = jobs.run_rollouts(request, req.out_dir)
        except (BatonError, ValueError, KeyError) as exc:
            raise fail(exc) from exc
        return RolloutsResponse(**report)

    @app.post("/v1/eval", response_model=EvalResponse)
    def eval_endpoint(req: EvalRequest) -> EvalResponse:
        try:
            summary = jobs.run_eval(req.run_dir)
        except (BatonError, ValueError) as exc:
            raise fail(exc) from exc
        return EvalResponse(summary=summary)

    @app.post("/v1/cost/sweep", response_model=CostSweepResponse)
    def cost_sweep(req: CostSweepRequest) -> CostSweepResponse:
        try:
            rows = jobs.run_cost_sweep(
                req.c, req.h_r, req.h_s, req.t_max, t_min=req.t_min, out_path=req.out_path
            )
        except ValueError as exc:
            raise fail(exc) from exc
        return CostSweepResponse(rows=[CostRow(**row) for row in rows])

    @app.post("/v1/score", response_model=ScoreResponse)
    def score_endpoint(req: ScoreRequest) -> ScoreResponse:
        try:
            outcome = reward.score(req.trace, req.answer)
        except ValueError as exc:
            raise fail(exc) from exc
        return ScoreResponse(
            reward=outcome.reward,
            extracted=outcome.extracted,
            terminated=outcome.terminated,
            reason=outcome.reason,
        )

    @app.post("/v1/annotate/strategies", response_model=AnnotateStrategiesResponse)
    def annotate_strategies(req: AnnotateStrategiesRequest) -> AnnotateStrategiesResponse:
        request = req.model_dump()
        request["backend"] = req.backend.to_spec()
        try:
            report = jobs.run_annotate_strategies(request)
        except (BatonError, ValueError, KeyError) as exc:
            raise fail(exc) from exc
        return AnnotateStrategiesResponse(**report)

    @app.post("/v1/annotate/difficulty", response_model=AnnotateDifficultyResponse)
    def annotate_difficulty(req: AnnotateDifficultyRequest) -> AnnotateDifficultyResponse:
        request = req.model_dump()
        request["backend"] = req.backend.to_spec()
        try:
            report = jobs.run_annotate_difficulty(request, req.out_path)
        except (BatonError, ValueError, KeyError) as exc:
            raise fail(exc) from exc
        return AnnotateDifficultyResponse(**report)

    return app
