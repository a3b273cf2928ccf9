"""HTTP facade over curation sessions and recorded runs.

Session state lives in one JSON document per session, rewritten atomically on
every mutation, so the process can die at any point and resume. Mutations for
one session are serialized behind a per-session lock; generation rounds call a
model backend and may take seconds, so they run as background jobs the client
polls. Runs are read-only here: they are produced by the CLI, and this service
only summarizes their logs.
"""

from __future__ import annotations

import logging
import socket
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .. import __version__, dataset
from ..backends import Backend, BackendConfig, make_backend
from ..iteration import BUCKETS, RunLog
from ..metrics import summarize_run
from ..world import WorldMap, load_world
from .schemas import (
    BucketProgress,
    CandidateView,
    CreateSessionRequest,
    ExportRequest,
    ExportResponse,
    HealthResponse,
    JobAccepted,
    JobView,
    LandmarkView,
    NextRoundRequest,
    RunListEntry,
    ScoresRequest,
    SessionSummary,
    WorldView,
)

log = logging.getLogger(__name__)


class ServeError(RuntimeError):
    """Raised when the service cannot start (busy port, unusable data dir)."""


@dataclass
class ServiceConfig:
    data_dir: Path
    worlds_dir: Optional[Path] = None
    generator_config: Optional[Path] = None
    ui_dir: Optional[Path] = None


class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = dataset.SessionStore(config.data_dir)
        self.runs_dir = Path(config.data_dir) / "runs"
        self.worlds: dict[str, WorldMap] = {}
        if config.worlds_dir:
            for path in sorted(Path(config.worlds_dir).glob("*")):
                if path.suffix not in (".world", ".json"):
                    continue
                try:
                    world = load_world(path.read_bytes())
                except Exception as exc:
                    log.warning("skipping world file %s: %s", path, exc)
                    continue
                self.worlds[world.id] = world
        self.generator: Optional[Backend] = None
        if config.generator_config:
            self.generator = make_backend(BackendConfig.from_file(config.generator_config))
        self.jobs: dict[str, dict] = {}
        self.executor = ThreadPoolExecutor(max_workers=2, thread_name_prefix="genjob")
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())


def create_app(config: ServiceConfig) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="navharness curation service", version=__version__)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def load_session(session_id: str) -> dataset.CurationSession:
        try:
            return state.store.load(session_id)
        except dataset.UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    def world_for(map_id: str) -> WorldMap:
        world = state.worlds.get(map_id)
        if world is None:
            raise HTTPException(status_code=404, detail=f"unknown map {map_id!r}")
        return world

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/sessions", response_model=SessionSummary, status_code=201)
    def create_session(body: CreateSessionRequest):
        world = world_for(body.map_id)
        session_id = f"sess-{uuid.uuid4().hex[:10]}"
        try:
            session = dataset.create_session(
                session_id, world, body.target_total, threshold=body.threshold
            )
        except (dataset.SessionError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        state.store.save(session)
        return _summary(session)

    @app.get("/sessions", response_model=list[SessionSummary])
    def list_sessions():
        return [_summary(state.store.load(sid)) for sid in state.store.list_ids()]

    @app.get("/sessions/{session_id}", response_model=SessionSummary)
    def get_session(session_id: str):
        return _summary(load_session(session_id))

    @app.get("/sessions/{session_id}/candidates", response_model=list[CandidateView])
    def list_candidates(session_id: str, status: str = Query(default="pending")):
        session = load_session(session_id)
        if status == "pending":
            ids = list(session.pending)
        elif status == "accepted":
            ids = list(session.accepted)
        elif status == "all":
            ids = list(session.candidates)
        else:
            raise HTTPException(status_code=422, detail=f"unknown status filter {status!r}")
        return [_candidate_view(session.candidates[cid]) for cid in ids]

    @app.post("/sessions/{session_id}/next", response_model=JobAccepted, status_code=202)
    def next_round(session_id: str, body: NextRoundRequest):
        session = load_session(session_id)
        if state.generator is None:
            raise HTTPException(status_code=409, detail="no generator backend configured")
        if session.status != dataset.STATUS_COLLECTING:
            raise HTTPException(
                status_code=409, detail=f"cannot generate in status {session.status!r}"
            )
        world = world_for(session.map_id)
        job_id = f"job-{uuid.uuid4().hex[:10]}"
        state.jobs[job_id] = {"state": "queued", "session_id": session_id}

        def run_job():
            state.jobs[job_id]["state"] = "running"
            try:
                with state.lock_for(session_id):
                    fresh = state.store.load(session_id)
                    _candidates, dropped = dataset.generate_candidates(
                        fresh, state.generator, world, body.batch
                    )
                    state.store.save(fresh)
                state.jobs[job_id].update({"state": "done", "dropped_count": dropped})
            except Exception as exc:
                log.exception("generation job %s failed", job_id)
                state.jobs[job_id].update({"state": "failed", "error": str(exc)})

        state.executor.submit(run_job)
        return JobAccepted(job_id=job_id)

    @app.get("/jobs/{job_id}", response_model=JobView)
    def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return JobView(
            state=job["state"],
            dropped_count=job.get("dropped_count"),
            error=job.get("error"),
        )

    @app.post("/sessions/{session_id}/scores", response_model=SessionSummary)
    def submit_scores(session_id: str, body: ScoresRequest):
        with state.lock_for(session_id):
            session = load_session(session_id)
            try:
                dataset.ingest_scores(
                    session, [(entry.candidate_id, entry.score) for entry in body.scores]
                )
            except dataset.UnknownCandidateError as exc:
                raise HTTPException(status_code=404, detail=f"unknown candidate {exc}")
            except dataset.SessionConflictError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except dataset.SessionError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            state.store.save(session)
        return _summary(session)

    @app.post("/sessions/{session_id}/export", response_model=ExportResponse)
    def export_session(session_id: str, body: ExportRequest):
        with state.lock_for(session_id):
            session = load_session(session_id)
            out_dir = Path(state.config.data_dir) / "exports" / session_id
            try:
                train_path, test_path = dataset.export_dataset(
                    session, body.test_fraction, body.seed, out_dir
                )
            except dataset.SessionError as exc:
                status = 409 if session.status != dataset.STATUS_COMPLETE else 422
                raise HTTPException(status_code=status, detail=str(exc))
        return ExportResponse(train_path=str(train_path), test_path=str(test_path))

    @app.get("/worlds/{map_id}", response_model=WorldView)
    def get_world(map_id: str):
        world = world_for(map_id)
        return WorldView(
            id=world.id,
            resolution_m=world.resolution,
            origin=[world.origin.x, world.origin.y],
            n_rows=world.n_rows,
            n_cols=world.n_cols,
            landmarks=[
                LandmarkView(
                    name=lm.name, x=lm.position.x, y=lm.position.y, attributes=lm.attributes
                )
                for lm in world.landmarks
            ],
        )

    @app.get("/runs", response_model=list[RunListEntry])
    def list_runs():
        entries = []
        for run in _load_runs(state.runs_dir):
            summary = summarize_run(run)
            entries.append(
                RunListEntry(
                    run_id=run.run_id,
                    iterations=len(summary.per_iteration),
                    n_attempts=len(run.records),
                    final_sr=summary.final.sr,
                )
            )
        return entries

    @app.get("/runs/{run_id}/metrics")
    def run_metrics(run_id: str):
        run = _find_run(state.runs_dir, run_id)
        return JSONResponse(summarize_run(run).to_report_dict())

    @app.get("/runs/{run_id}/accuracy.csv")
    def run_accuracy(run_id: str):
        run = _find_run(state.runs_dir, run_id)
        return PlainTextResponse(run.accuracy_csv(), media_type="text/csv")

    if config.ui_dir and Path(config.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def _summary(session: dataset.CurationSession) -> SessionSummary:
    have = session.accepted_by_bucket()
    return SessionSummary(
        session_id=session.session_id,
        status=session.status,
        round=session.round,
        pending_count=len(session.pending),
        buckets={
            b: BucketProgress(target=session.bucket_targets[b], accepted=have[b]) for b in BUCKETS
        },
    )


def _candidate_view(candidate: dataset.CandidateTask) -> CandidateView:
    return CandidateView(
        id=candidate.id,
        task=candidate.text,
        num_goals=len(candidate.goals),
        map_id=candidate.map_id,
        goals=[g.as_pair() for g in candidate.goals],
        bucket=candidate.bucket,
        round=candidate.generation_round,
        provenance=candidate.provenance,
        score=candidate.score,
    )


def _load_runs(runs_dir: Path) -> list[RunLog]:
    runs = []
    if not runs_dir.is_dir():
        return runs
    for logfile in sorted(runs_dir.glob("*/runlog.jsonl")):
        try:
            runs.append(RunLog.from_jsonl(logfile.read_text(encoding="utf-8")))
        except (ValueError, KeyError) as exc:
            log.warning("skipping unreadable run log %s: %s", logfile, exc)
    return runs


def _find_run(runs_dir: Path, run_id: str) -> RunLog:
    for run in _load_runs(runs_dir):
        if run.run_id == run_id:
            return run
    raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8421) -> None:
    """Run the service until interrupted. Fails fast on a busy port."""
    import uvicorn

    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    probe = data_dir / ".write-probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ServeError(f"data dir {data_dir} is not writable: {exc}") from exc

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((host, port))
        except OSError as exc:
            raise ServeError(f"cannot bind {host}:{port}: {exc}") from exc

    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="info")
