"""Request and response envelopes for the HTTP service.

Envelopes are typed strictly (unknown top-level keys rejected); the nested
config sections stay plain dicts and are validated by the core modules,
which own those invariants. Binary artifacts travel base64-encoded.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArtifactBundle(_Strict):
    """File name -> content; text and base64-encoded binary kept apart."""

    text: dict[str, str] = Field(default_factory=dict)
    binary_b64: dict[str, str] = Field(default_factory=dict)


class HealthResponse(_Strict):
    status: str
    version: str


class SynthRequest(_Strict):
    seed: int = 0
    synth: dict


class SynthResponse(_Strict):
    artifacts: ArtifactBundle


class TrainRequest(_Strict):
    seed: int = 0
    dataset: dict
    network: dict = Field(default_factory=dict)
    train: dict


class TrainResponse(_Strict):
    artifacts: ArtifactBundle
    final_loss: float


class ElicitRequest(_Strict):
    seed: int = 0
    params_b64: str
    network: dict
    elicit: dict
    dataset: dict | None = None


class ElicitResponse(_Strict):
    artifacts: ArtifactBundle
    summary: dict


class EvaluateRequest(_Strict):
    seed: int = 0
    dataset: dict
    network: dict = Field(default_factory=dict)
    train: dict = Field(default_factory=dict)
    evaluate: dict = Field(default_factory=dict)
    params_b64: str | None = None


class EvaluateResponse(_Strict):
    artifacts: ArtifactBundle
    summary: dict


class ReportRequest(_Strict):
    report_json: str
    report: dict = Field(default_factory=dict)


class ReportResponse(_Strict):
    artifacts: ArtifactBundle


class ErrorDetail(_Strict):
    kind: str  # config | io | numeric
    message: str
