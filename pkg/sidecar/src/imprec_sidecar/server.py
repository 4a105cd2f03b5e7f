"""HTTP front-end speaking the client wire protocol.

Routes (bodies JSON, UTF-8, field names exact):

* ``POST /v1/finetune``  {"pairs": [{"prompt", "completion"}...], "epochs",
  "adapter_rank", "seed"} -> {"job_id"}
* ``GET /v1/finetune/<job_id>`` -> {"status": pending|running|done|failed,
  "detail"}
* ``POST /v1/complete``  {"prompt", "max_new_tokens", "temperature",
  "stop"} -> {"text"}

Errors: 400 malformed body, 404 unknown job, 500 with detail on internal
failure.
"""

from __future__ import annotations

import os

import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .decoding import generate
from .jobs import JobRunner
from .model import load_model


class PairBody(BaseModel):
    prompt: str
    completion: str


class FinetuneBody(BaseModel):
    pairs: list[PairBody]
    epochs: int = 3
    adapter_rank: int = 8
    seed: int = 0


class CompleteBody(BaseModel):
    prompt: str
    max_new_tokens: int = 16
    temperature: float = 0.0
    stop: list[str] = []


def create_app(model_dir: str) -> FastAPI:
    base_path = os.path.join(model_dir, "base.pt")
    if not os.path.exists(base_path):
        raise FileNotFoundError(
            f"{base_path} not found; run `imprec-sidecar pretrain --model-dir {model_dir}` first"
        )
    runner = JobRunner(load_model(base_path), model_dir)
    app = FastAPI(title="imprec-sidecar")
    app.state.runner = runner

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc.errors()[:3])})

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500, content={"detail": f"{type(exc).__name__}: {exc}"}
        )

    @app.post("/v1/finetune")
    def finetune(body: FinetuneBody):
        pairs = [(p.prompt, p.completion) for p in body.pairs]
        job_id = runner.submit(pairs, body.epochs, body.adapter_rank, body.seed)
        return {"job_id": job_id}

    @app.get("/v1/finetune/{job_id}")
    def finetune_status(job_id: str):
        job = runner.get(job_id)
        if job is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown job {job_id!r}"})
        return {"status": job.status, "detail": job.detail}

    @app.post("/v1/complete")
    def complete(body: CompleteBody):
        model = runner.completion_model()
        generator = None
        if body.temperature > 0.0:
            generator = torch.Generator().manual_seed(0)
        text = generate(
            model,
            body.prompt,
            max_new_tokens=body.max_new_tokens,
            temperature=body.temperature,
            stop=body.stop,
            generator=generator,
        )
        return {"text": text}

    return app
