"""Request/response bodies for the HTTP service.

Every response carries a top-level ``schema_version`` so clients can detect
format changes. Effects are serialized field-for-field from the engine's
estimates; the service adds only identifiers and timing.
"""

from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field

from ..effects import EffectEstimate

SCHEMA_VERSION = "1"


class SessionCreateRequest(BaseModel):
    """Body of POST /sessions: where the data lives and how to model it."""

    model_config = ConfigDict(extra="forbid")

    data_path: str
    spec: dict
    compression_keys: list[str] = Field(default_factory=list)
    columns: dict[str, str] | None = None
    compression: bool = True


class Diagnostics(BaseModel):
    n: int
    p: int
    groups: int
    compression_ratio: float
    outcomes: list[str]
    arms: list[str]
    reference: str
    grouping_keys: list[str]
    n_clusters: int
    fit_count: int
    timings: dict[str, float]
    created_at: str


class SessionCreated(BaseModel):
    schema_version: str = SCHEMA_VERSION
    session_id: str
    diagnostics: Diagnostics


class SessionSummary(BaseModel):
    session_id: str
    created_at: str
    n: int
    p: int
    groups: int
    compression_ratio: float
    fit_seconds: float
    fit_count: int


class SessionList(BaseModel):
    schema_version: str = SCHEMA_VERSION
    sessions: list[SessionSummary]


class SessionDetail(BaseModel):
    schema_version: str = SCHEMA_VERSION
    session_id: str
    diagnostics: Diagnostics


class Effect(BaseModel):
    outcome: str
    arm: str
    estimate: float
    std_error: float
    statistic: float | None
    p_value: float
    ci_low: float
    ci_high: float
    n_group: int
    group_key: list
    arm_support: str
    covariance: str

    @classmethod
    def from_estimate(cls, est: EffectEstimate) -> "Effect":
        d = est.to_dict()
        # JSON has no Infinity; a zero-SE cell reports a null statistic.
        if not math.isfinite(d["statistic"]):
            d["statistic"] = None
        return cls(**d)


class QueryEcho(BaseModel):
    outcome: str
    arm: str
    group_by: list[str]
    covariance: str
    confidence_level: float


class EffectsResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    session_id: str
    query: QueryEcho
    effects: list[Effect]
    elapsed_seconds: float


class HealthResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    status: str = "ok"


class ErrorBody(BaseModel):
    type: str
    message: str
    column: str | None = None
    term_index: int | None = None


class ErrorResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    error: ErrorBody
