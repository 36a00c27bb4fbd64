"""Stateless HTTP service exposing the pipeline stages.

Every endpoint is a pure function of its request body: datasets arrive
inline or as server-visible paths, trained parameters travel base64 in
JSON, and responses carry the artifact files as content, never touching a
shared store. Client errors surface as HTTP 400 with a kind the CLI maps
to its exit codes (config -> 1, io -> 2, numeric -> 3).
"""

from __future__ import annotations

import base64
import binascii
import json

from fastapi import FastAPI, HTTPException

from . import __version__
from .errors import DataError, ElicitError, NumericsError
from .pipeline import run_elicit, run_evaluate, run_report, run_synth, run_train
from .schemas import (
    ArtifactBundle,
    ElicitRequest,
    ElicitResponse,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    ReportRequest,
    ReportResponse,
    SynthRequest,
    SynthResponse,
    TrainRequest,
    TrainResponse,
)

app = FastAPI(title="elicitd", version=__version__)


def error_kind(exc: Exception) -> str:
    if isinstance(exc, NumericsError):
        return "numeric"
    if isinstance(exc, (DataError, OSError, json.JSONDecodeError)):
        return "io"
    return "config"


def _guard(fn):
    try:
        return fn()
    except (ElicitError, OSError, ValueError) as exc:
        raise HTTPException(
            status_code=400, detail={"kind": error_kind(exc), "message": str(exc)}
        ) from exc


def _bundle(artifacts: dict) -> ArtifactBundle:
    text = {k: v for k, v in artifacts.items() if isinstance(v, str)}
    blobs = {
        k: base64.b64encode(v).decode("ascii")
        for k, v in artifacts.items()
        if isinstance(v, bytes)
    }
    return ArtifactBundle(text=text, binary_b64=blobs)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    artifacts = _guard(lambda: run_synth(req.model_dump()))
    return SynthResponse(artifacts=_bundle(artifacts))


@app.post("/train", response_model=TrainResponse)
def train(req: TrainRequest) -> TrainResponse:
    artifacts, final_loss = _guard(lambda: run_train(req.model_dump()))
    return TrainResponse(artifacts=_bundle(artifacts), final_loss=final_loss)


@app.post("/elicit", response_model=ElicitResponse)
def elicit(req: ElicitRequest) -> ElicitResponse:
    def go():
        try:
            blob = base64.b64decode(req.params_b64, validate=True)
        except binascii.Error as exc:
            raise DataError(f"params_b64 is not valid base64: {exc}") from exc
        cfg = req.model_dump()
        cfg.pop("params_b64")
        return run_elicit(cfg, blob)

    artifacts, summary = _guard(go)
    return ElicitResponse(artifacts=_bundle(artifacts), summary=summary)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest) -> EvaluateResponse:
    def go():
        blob = None
        if req.params_b64 is not None:
            try:
                blob = base64.b64decode(req.params_b64, validate=True)
            except binascii.Error as exc:
                raise DataError(f"params_b64 is not valid base64: {exc}") from exc
        cfg = req.model_dump()
        cfg.pop("params_b64")
        return run_evaluate(cfg, blob)

    artifacts, summary = _guard(go)
    return EvaluateResponse(artifacts=_bundle(artifacts), summary=summary)


@app.post("/report", response_model=ReportResponse)
def report(req: ReportRequest) -> ReportResponse:
    def go():
        doc = json.loads(req.report_json)
        return run_report(doc, {"report": req.report})

    artifacts = _guard(go)
    return ReportResponse(artifacts=_bundle(artifacts))
