"""HTTP API over the engine, consumed by the web UI and scripts.

Evaluations run asynchronously on a worker pool; clients poll the job until
its status is terminal. All payloads use the canonical JSON schemas, and
errors come back as ``{"error": code, "message": str}``. API keys enter only
through environment variables; request bodies never carry raw keys.
"""

from __future__ import annotations

import logging
import socket
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .builder import (
    BuilderSession,
    SessionStore,
    draft_rubric,
    finalize,
    generate_calibration_examples,
    revise_rubric,
)
from .cache import ContentCache
from .config import EngineSettings
from .errors import (
    AllMetricsFailed,
    AuditError,
    ConfigInvalid,
    DraftInvalid,
    DuplicateMetricId,
    EmptyTranscript,
    InvalidRequest,
    MalformedInput,
    PortInUse,
    SchemaViolation,
    SessionFinalized,
    UnknownMetric,
    UnknownRole,
)
from .judge import HttpJudgeClient, MockJudgeClient
from .orchestrator import EvaluationRequest, run_evaluation
from .query import answer_query
from .registry import Registry, load_library
from .transcript import SOURCES, Transcript, parse_transcript

logger = logging.getLogger(__name__)

JOB_PENDING = "pending"
JOB_RUNNING = "running"
JOB_COMPLETE = "complete"
JOB_PARTIAL = "partial_failure"
JOB_FAILED = "failed"

_TERMINAL = (JOB_COMPLETE, JOB_PARTIAL, JOB_FAILED)

_STATUS_BY_ERROR = {
    MalformedInput: 400,
    EmptyTranscript: 400,
    UnknownRole: 400,
    InvalidRequest: 400,
    ConfigInvalid: 400,
    SchemaViolation: 400,
    DraftInvalid: 400,
    DuplicateMetricId: 409,
    SessionFinalized: 409,
    UnknownMetric: 404,
}


@dataclass
class EvaluationJob:
    evaluation_id: str
    status: str = JOB_PENDING
    done_items: int = 0
    total_items: int = 0
    report: Any = None
    error: str | None = None
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def set_progress(self, done: int, total: int) -> None:
        with self._lock:
            # progress is monotone; stale callbacks never move it backward
            self.done_items = max(self.done_items, done)
            self.total_items = max(self.total_items, total)

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "evaluation_id": self.evaluation_id,
                "status": self.status,
                "progress": {"done": self.done_items, "total": self.total_items},
                "report": self.report.to_dict() if self.report is not None else None,
                "error": self.error,
            }


def _error_json(exc: AuditError) -> JSONResponse:
    status = 400
    for klass, code in _STATUS_BY_ERROR.items():
        if isinstance(exc, klass):
            status = code
            break
    return JSONResponse(
        status_code=status, content={"error": exc.code, "message": str(exc)}
    )


def _apply_overrides(settings: EngineSettings, overrides: dict) -> EngineSettings:
    """A small, explicit subset of config keys may be overridden per request."""

    import copy

    updated = copy.copy(settings)
    updated.judge = settings.judge
    for key, value in overrides.items():
        if key == "judge.model_name":
            from dataclasses import replace

            updated.judge = replace(updated.judge, model_name=str(value))
        elif key == "judge.endpoint_url":
            from dataclasses import replace

            updated.judge = replace(updated.judge, endpoint_url=str(value))
        elif key == "judge.temperature":
            from dataclasses import replace

            updated.judge = replace(updated.judge, temperature=float(value))
        elif key == "max_concurrency":
            updated.max_concurrency = int(value)
        elif key == "scopes":
            updated.scopes = str(value)
        elif key == "predictors.mock":
            updated.use_mock = bool(value)
        else:
            raise ConfigInvalid(f"config override {key!r} is not allowed")
    return updated


class ServiceState:
    """Mutable service-side state behind the API."""

    def __init__(self, settings: EngineSettings, registry: Registry | None = None) -> None:
        self.settings = settings
        custom_store = settings.state_dir / "custom_metrics.json"
        self.registry = registry or load_library(custom_store=custom_store)
        self.cache = ContentCache(settings.cache_dir)
        self.session_store = SessionStore(settings.state_dir)
        self.transcripts: dict[str, Transcript] = {}
        self.jobs: dict[str, EvaluationJob] = {}
        self.sessions: dict[str, BuilderSession] = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=4, thread_name_prefix="evaluation")

    def judge_client(self, settings: EngineSettings | None = None):
        active = settings or self.settings
        return MockJudgeClient() if active.use_mock else HttpJudgeClient(active.judge)

    def run_job(self, job: EvaluationJob, request: EvaluationRequest) -> None:
        with job._lock:
            job.status = JOB_RUNNING
        try:
            report = run_evaluation(
                request,
                self.registry,
                cache=self.cache,
                low_score_flag_max=self.settings.low_score_flag_max,
                toxicity_flag_min=self.settings.toxicity_flag_min,
                progress_callback=job.set_progress,
            )
        except AllMetricsFailed as exc:
            with job._lock:
                job.status = JOB_FAILED
                job.error = str(exc)
            return
        except Exception as exc:  # surfaced to the poller, never a 500 later
            logger.exception("evaluation job %s crashed", job.evaluation_id)
            with job._lock:
                job.status = JOB_FAILED
                job.error = str(exc)
            return
        with job._lock:
            job.report = report
            job.status = JOB_PARTIAL if report.errors else JOB_COMPLETE


def create_app(
    settings: EngineSettings | None = None,
    registry: Registry | None = None,
    static_dir: Path | str | None = None,
) -> FastAPI:
    settings = settings or EngineSettings()
    state = ServiceState(settings, registry=registry)
    app = FastAPI(title="dialogue-audit", version="0.1.0")
    app.state.engine = state

    @app.exception_handler(AuditError)
    async def audit_error_handler(request: Request, exc: AuditError):
        return _error_json(exc)

    @app.get("/api/metrics")
    def list_metrics(category: str | None = None, family: str | None = None):
        summaries = state.registry.list_metrics(family=family, category=category)
        return {"metrics": [s.to_dict() for s in summaries]}

    @app.post("/api/transcripts")
    async def upload_transcript(request: Request):
        body = await request.json()
        fmt = body.get("format", "plain_text")
        if fmt not in SOURCES:
            raise MalformedInput(f"unknown transcript format {fmt!r}")
        content = body.get("content")
        if not isinstance(content, str):
            raise MalformedInput("'content' must be a string")
        transcript = parse_transcript(content, fmt)
        with state.lock:
            state.transcripts[transcript.id] = transcript
        return {
            "transcript_id": transcript.id,
            "turn_count": len(transcript.turns),
            "turns": [
                {"index": t.index, "role": t.role, "text": t.text} for t in transcript.turns
            ],
        }

    @app.post("/api/evaluations")
    async def create_evaluation(request: Request):
        body = await request.json()
        transcript_id = body.get("transcript_id")
        with state.lock:
            transcript = state.transcripts.get(transcript_id)
        if transcript is None:
            return JSONResponse(
                status_code=404,
                content={"error": "not_found", "message": f"no transcript {transcript_id!r}"},
            )
        metric_ids = body.get("metric_ids")
        if not isinstance(metric_ids, list) or not metric_ids:
            raise InvalidRequest("'metric_ids' must be a non-empty list")
        overrides = body.get("config_overrides") or {}
        active = _apply_overrides(state.settings, overrides)
        eval_request = EvaluationRequest(
            transcript=transcript,
            metric_ids=[str(m) for m in metric_ids],
            judge=active.judge,
            predictor_endpoints=dict(active.predictor_endpoints),
            max_concurrency=active.max_concurrency,
            scopes=active.scopes,
            use_mock=active.use_mock,
        )
        # validate before accepting the job so bad requests fail fast
        from .orchestrator import _validate_request

        _validate_request(eval_request, state.registry)

        import uuid

        job = EvaluationJob(evaluation_id=uuid.uuid4().hex[:12])
        with state.lock:
            state.jobs[job.evaluation_id] = job
        state.executor.submit(state.run_job, job, eval_request)
        return {"evaluation_id": job.evaluation_id}

    @app.get("/api/evaluations/{evaluation_id}")
    def get_evaluation(evaluation_id: str):
        with state.lock:
            job = state.jobs.get(evaluation_id)
        if job is None:
            return JSONResponse(
                status_code=404,
                content={"error": "not_found", "message": f"no evaluation {evaluation_id!r}"},
            )
        return job.to_dict()

    @app.post("/api/rubrics/draft")
    async def rubric_draft(request: Request):
        body = await request.json()
        description = str(body.get("description", ""))
        constraints = [str(c) for c in body.get("constraints", [])]
        if not description.strip():
            raise InvalidRequest("'description' must be non-empty")
        session = draft_rubric(
            state.judge_client(), description, constraints, store=state.session_store
        )
        with state.lock:
            state.sessions[session.session_id] = session
        return session.to_dict()

    def _session(session_id: str) -> BuilderSession:
        with state.lock:
            session = state.sessions.get(session_id)
        if session is None and state.session_store.exists(session_id):
            session = state.session_store.load(session_id)
            with state.lock:
                state.sessions[session_id] = session
        if session is None:
            raise UnknownMetric(f"no rubric session {session_id!r}")
        return session

    @app.post("/api/rubrics/{session_id}/revise")
    async def rubric_revise(session_id: str, request: Request):
        body = await request.json()
        feedback = str(body.get("feedback", ""))
        if not feedback.strip():
            raise InvalidRequest("'feedback' must be non-empty")
        session = _session(session_id)
        revise_rubric(session, feedback, state.judge_client(), store=state.session_store)
        return session.to_dict()

    @app.post("/api/rubrics/{session_id}/examples")
    async def rubric_examples(session_id: str, request: Request):
        body = await request.json()
        n = body.get("n", 3)
        if not isinstance(n, int):
            raise InvalidRequest("'n' must be an integer")
        session = _session(session_id)
        examples = generate_calibration_examples(
            session, n, state.judge_client(), store=state.session_store
        )
        return {"examples": [e.to_dict() for e in examples]}

    @app.post("/api/rubrics/{session_id}/finalize")
    async def rubric_finalize(session_id: str):
        session = _session(session_id)
        metric_id = finalize(session, state.registry, store=state.session_store)
        return {"metric_id": metric_id}

    @app.post("/api/query")
    async def query(request: Request):
        body = await request.json()
        evaluation_id = body.get("evaluation_id")
        with state.lock:
            job = state.jobs.get(evaluation_id)
        if job is None or job.report is None:
            return JSONResponse(
                status_code=404,
                content={
                    "error": "not_found",
                    "message": f"no finished evaluation {evaluation_id!r}",
                },
            )
        question = str(body.get("question", ""))
        if not question.strip():
            raise InvalidRequest("'question' must be non-empty")
        result = answer_query(job.report, question, state.judge_client(), state.registry)
        return result.to_dict()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app


def serve(
    settings: EngineSettings,
    port: int,
    host: str = "127.0.0.1",
    static_dir: Path | str | None = None,
) -> None:
    """Run the HTTP service until interrupted."""

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError:
        raise PortInUse(f"port {port} on {host} is already in use") from None
    finally:
        probe.close()

    import uvicorn

    app = create_app(settings, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
