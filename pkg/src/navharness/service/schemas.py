"""Request/response models for the curation and run-monitoring service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class BucketProgress(BaseModel):
    target: int
    accepted: int


class SessionSummary(BaseModel):
    session_id: str
    status: str
    round: int
    pending_count: int
    buckets: dict[str, BucketProgress]


class CreateSessionRequest(BaseModel):
    map_id: str
    target_total: int = Field(ge=7)
    threshold: float = Field(default=7.0, ge=0.0, le=10.0)


class CandidateView(BaseModel):
    id: str
    task: str
    num_goals: int
    map_id: str
    goals: list[list[float]]
    bucket: str
    round: int
    provenance: str
    score: Optional[float] = None


class NextRoundRequest(BaseModel):
    batch: int = Field(default=5, ge=1, le=50)


class JobAccepted(BaseModel):
    job_id: str


class JobView(BaseModel):
    state: str  # queued | running | done | failed
    dropped_count: Optional[int] = None
    error: Optional[str] = None


class ScoreEntry(BaseModel):
    candidate_id: str
    score: float = Field(ge=0.0, le=10.0)


class ScoresRequest(BaseModel):
    scores: list[ScoreEntry]


class ExportRequest(BaseModel):
    test_fraction: float = Field(gt=0.0, lt=1.0)
    seed: int = 0


class ExportResponse(BaseModel):
    train_path: str
    test_path: str


class LandmarkView(BaseModel):
    name: str
    x: float
    y: float
    attributes: dict[str, str]


class WorldView(BaseModel):
    id: str
    resolution_m: float
    origin: list[float]
    n_rows: int
    n_cols: int
    landmarks: list[LandmarkView]


class RunListEntry(BaseModel):
    run_id: str
    iterations: int
    n_attempts: int
    final_sr: float


class HealthResponse(BaseModel):
    status: str
    version: str
