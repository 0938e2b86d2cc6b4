"""HTTP surface: POST /score, POST /count_tokens, GET /health.

All responses are JSON, including every error path.  Scoring runs behind
a lock so requests are answered one at a time — the queue a single model
instance implies — while token counting and health stay lock-free.
"""
from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import ServiceConfig
from .lm import ModelError, build_models
from .scoring import EmptyTextError, PerplexityRatioScorer
from .tokenizer import count_tokens


class ScoreBody(BaseModel):
    texts: list[str] = Field(min_length=1)


class CountBody(BaseModel):
    texts: list[str]


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="scorer-service", docs_url=None, redoc_url=None)
    app.state.config = config
    app.state.scoring_lock = threading.Lock()
    app.state.scorer = None
    app.state.degraded_reason = None
    try:
        observer, performer = build_models(config.observer_model,
                                           config.performer_model)
        app.state.scorer = PerplexityRatioScorer(
            observer=observer, performer=performer,
            max_input_tokens=config.max_input_tokens)
    except ModelError as exc:
        app.state.degraded_reason = str(exc)

    @app.exception_handler(Exception)
    async def unhandled(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=500,
                            content={"detail": f"internal error: {exc}"})

    @app.get("/health")
    def health() -> dict:
        status = "degraded" if app.state.scorer is None else "ok"
        payload = {"status": status, "model": config.model_label}
        if app.state.degraded_reason:
            payload["reason"] = app.state.degraded_reason
        return payload

    @app.post("/score")
    def score(body: ScoreBody) -> dict:
        scorer: PerplexityRatioScorer | None = app.state.scorer
        if scorer is None:
            raise HTTPException(
                status_code=503,
                detail=f"model unavailable: {app.state.degraded_reason}")
        with app.state.scoring_lock:
            try:
                scores = scorer.score_texts(body.texts)
            except EmptyTextError as exc:
                raise HTTPException(status_code=422,
                                    detail=str(exc)) from exc
        return {"scores": scores}

    @app.post("/count_tokens")
    def count(body: CountBody) -> dict:
        return {"counts": [count_tokens(text) for text in body.texts]}

    return app
