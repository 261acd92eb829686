"""Run a metric set over a transcript with bounded parallelism.

Work items (one metric at one scope) are independent; a failed metric never
aborts its siblings. Under deterministic mocks a full run is bit-reproducible
apart from the report id and timestamp.
"""

from __future__ import annotations

import datetime as dt
import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .cache import ContentCache, digest_of
from .config import EngineSettings
from .errors import (
    AllMetricsFailed,
    AuditError,
    AuthMissing,
    BackendUnreachable,
    InvalidRequest,
    JudgeFailure,
    MixedPayloadTypes,
    NoTranscriptsFound,
    ParseFailure,
    PredictorError,
)
from .factuality import (
    FactualityResult,
    LocalSnippetRetriever,
    NullRetriever,
    score_factuality,
)
from .judge import (
    HttpJudgeClient,
    JudgeBackendConfig,
    MockJudgeClient,
    Scope,
    evaluate_rubric,
)
from .predictors import (
    HttpPredictorClient,
    MockPredictorClient,
    PredictorEndpoint,
    RelationsPayload,
    context_for,
    extract_triggers,
    payload_from_dict,
    payload_to_dict,
    predict_turn,
)
from .registry import ModelMetricSpec, Registry, RubricSpec
from .report import (
    LOW_SCORE_FLAG_MAX,
    TOXICITY_FLAG_MIN,
    EvaluationReport,
    MetricError,
    MetricResult,
    SessionAggregate,
    aggregate,
    flag_salient_turns,
    summarize_session,
)
from .transcript import SUPPORTER, Transcript, parse_transcript

logger = logging.getLogger(__name__)

SCOPE_TURN_AND_SESSION = "turn_and_session"
SCOPE_SESSION_ONLY = "session_only"

FACT_KINDS = ("fact_general", "fact_medical")


@dataclass
class EvaluationRequest:
    transcript: Transcript
    metric_ids: list[str]
    judge: JudgeBackendConfig
    predictor_endpoints: dict[str, PredictorEndpoint] = field(default_factory=dict)
    max_concurrency: int = 4
    scopes: str = SCOPE_TURN_AND_SESSION
    use_mock: bool = False


class ConcurrencyMeter:
    """Tracks the in-flight high-water mark across worker threads."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._active = 0
        self.high_water = 0

    def __enter__(self) -> "ConcurrencyMeter":
        with self._lock:
            self._active += 1
            self.high_water = max(self.high_water, self._active)
        return self

    def __exit__(self, *exc) -> None:
        with self._lock:
            self._active -= 1


@dataclass(frozen=True)
class _WorkItem:
    metric_id: str
    scope_key: str  # "turn:<i>" | "session"


def _classify_stage(exc: Exception) -> str:
    if isinstance(exc, PredictorError):
        return "predictor"
    if isinstance(exc, ParseFailure):
        return "parse"
    if isinstance(exc, (JudgeFailure, BackendUnreachable, AuthMissing)):
        return "judge"
    if isinstance(exc, MixedPayloadTypes):
        return "aggregate"
    return "aggregate"


def _validate_request(req: EvaluationRequest, registry: Registry) -> list:
    if not req.metric_ids:
        raise InvalidRequest("metric_ids must be non-empty")
    if len(set(req.metric_ids)) != len(req.metric_ids):
        raise InvalidRequest("metric_ids must be unique")
    if req.max_concurrency < 1:
        raise InvalidRequest("max_concurrency must be >= 1")
    if req.scopes not in (SCOPE_TURN_AND_SESSION, SCOPE_SESSION_ONLY):
        raise InvalidRequest(f"unknown scopes value {req.scopes!r}")
    specs = []
    for metric_id in req.metric_ids:
        if metric_id not in registry:
            raise InvalidRequest(f"unknown metric id {metric_id!r}")
        spec = registry.get(metric_id)
        if (
            isinstance(spec, ModelMetricSpec)
            and not req.use_mock
            and spec.predictor not in FACT_KINDS
            and spec.predictor not in req.predictor_endpoints
        ):
            raise InvalidRequest(
                f"metric {metric_id!r} needs a {spec.predictor} endpoint or the mock flag"
            )
        specs.append(spec)
    return specs


def _target_turns(spec, transcript: Transcript) -> list:
    if isinstance(spec, RubricSpec):
        return transcript.turns_for_role(SUPPORTER)
    if spec.target_role == "both":
        return list(transcript.turns)
    return transcript.turns_for_role(spec.target_role)


def _cached(cache: ContentCache | None, digest: str, compute, serialize, deserialize):
    if cache is not None:
        stored = cache.get(digest)
        if stored is not None:
            try:
                return deserialize(stored)
            except (KeyError, ValueError, TypeError):
                pass
    value = compute()
    if cache is not None:
        cache.put(digest, serialize(value))
    return value


def run_evaluation(
    req: EvaluationRequest,
    registry: Registry,
    *,
    cache: ContentCache | None = None,
    judge_client=None,
    predictor_client=None,
    retriever=None,
    low_score_flag_max: int | None = None,
    toxicity_flag_min: float | None = None,
    progress_callback=None,
) -> EvaluationReport:
    """Evaluate the requested metrics and assemble the report.

    Backend clients are built from the request unless injected (tests inject
    instrumented ones). Results keep the request's metric order; errors are
    additive and never abort sibling metrics.
    """

    specs = _validate_request(req, registry)
    transcript = req.transcript

    if judge_client is None:
        judge_client = MockJudgeClient() if req.use_mock else HttpJudgeClient(req.judge)
    if predictor_client is None:
        predictor_client = (
            MockPredictorClient() if req.use_mock else HttpPredictorClient(req.predictor_endpoints)
        )
    if retriever is None:
        retriever = NullRetriever()

    judge_config = judge_client.config

    # Build independent work items.
    items: list[tuple[_WorkItem, object]] = []  # (item, callable)
    for spec in specs:
        if isinstance(spec, RubricSpec):
            scopes: list[Scope] = []
            if req.scopes == SCOPE_TURN_AND_SESSION:
                scopes.extend(Scope.turn(t.index) for t in _target_turns(spec, transcript))
            scopes.append(Scope.session())
            for scope in scopes:
                items.append(
                    (
                        _WorkItem(spec.id, scope.key()),
                        _rubric_task(judge_client, spec, transcript, scope, cache),
                    )
                )
        elif spec.predictor == "emotion_trigger":
            items.append(
                (
                    _WorkItem(spec.id, "session"),
                    _triggers_task(predictor_client, transcript, cache),
                )
            )
        elif spec.predictor in FACT_KINDS:
            for turn in _target_turns(spec, transcript):
                items.append(
                    (
                        _WorkItem(spec.id, f"turn:{turn.index}"),
                        _factuality_task(
                            spec.predictor, turn, judge_client, retriever, cache, judge_config
                        ),
                    )
                )
        else:
            for turn in _target_turns(spec, transcript):
                items.append(
                    (
                        _WorkItem(spec.id, f"turn:{turn.index}"),
                        _predictor_task(predictor_client, spec.predictor, turn, transcript, cache),
                    )
                )

    meter = ConcurrencyMeter()
    outcomes: dict[_WorkItem, object] = {}
    failures: dict[_WorkItem, Exception] = {}
    done_counter = {"n": 0}
    counter_lock = threading.Lock()

    def run_item(pair):
        item, task = pair
        with meter:
            try:
                return item, task(), None
            except Exception as exc:  # collected per metric below
                return item, None, exc
            finally:
                if progress_callback is not None:
                    with counter_lock:
                        done_counter["n"] += 1
                        progress_callback(done_counter["n"], len(items))

    if progress_callback is not None:
        progress_callback(0, len(items))

    with ThreadPoolExecutor(max_workers=req.max_concurrency) as pool:
        for item, value, exc in pool.map(run_item, items):
            if exc is None:
                outcomes[item] = value
            else:
                failures[item] = exc

    results: list[MetricResult] = []
    errors: list[MetricError] = []
    for spec in specs:
        metric_failures = {
            item: exc for item, exc in failures.items() if item.metric_id == spec.id
        }
        if metric_failures:
            item, exc = sorted(metric_failures.items(), key=lambda kv: kv[0].scope_key)[0]
            turn_index = (
                int(item.scope_key.split(":", 1)[1]) if item.scope_key.startswith("turn:") else None
            )
            logger.warning("metric %s failed at %s: %s", spec.id, item.scope_key, exc)
            errors.append(
                MetricError(
                    metric_id=spec.id,
                    stage=_classify_stage(exc),
                    message=str(exc),
                    turn_index=turn_index,
                )
            )
            continue
        results.append(_assemble_result(spec, transcript, outcomes))

    if not results:
        raise AllMetricsFailed(
            "every requested metric failed: "
            + "; ".join(f"{e.metric_id}: {e.message}" for e in errors)
        )

    flags = flag_salient_turns(
        results,
        low_score_max=low_score_flag_max if low_score_flag_max is not None else LOW_SCORE_FLAG_MAX,
        toxicity_min=toxicity_flag_min if toxicity_flag_min is not None else TOXICITY_FLAG_MIN,
    )
    summary = summarize_session(results, flags, judge_client, cache)

    return EvaluationReport(
        report_id=uuid.uuid4().hex[:12],
        transcript_id=transcript.id,
        created_at=dt.datetime.now(dt.timezone.utc).isoformat(),
        engine_version=__version__,
        results=tuple(results),
        errors=tuple(errors),
        summary=summary,
        flags=tuple(flags),
    )


def _rubric_task(judge_client, spec, transcript, scope, cache):
    def task():
        return evaluate_rubric(judge_client, spec, transcript, scope, cache)

    return task


def _predictor_task(predictor_client, kind, turn, transcript, cache):
    context = context_for(transcript, turn)
    digest = digest_of("predict", kind, turn.text, context)

    def task():
        return _cached(
            cache,
            digest,
            lambda: predict_turn(predictor_client, kind, turn, context).payload,
            payload_to_dict,
            payload_from_dict,
        )

    return task


def _triggers_task(predictor_client, transcript, cache):
    digest = digest_of("relations", [(t.role, t.text) for t in transcript.turns])

    def task():
        def compute():
            results = extract_triggers(predictor_client, transcript)
            relations = tuple(r.payload.relations[0] for r in results)
            return RelationsPayload(relations=relations)

        return _cached(cache, digest, compute, payload_to_dict, payload_from_dict)

    return task


def _factuality_task(kind, turn, judge_client, retriever, cache, judge_config):
    retriever_name = getattr(retriever, "name", type(retriever).__name__)
    digest = digest_of(
        "factuality",
        kind,
        turn.index,
        turn.text,
        judge_config.fingerprint,
        judge_config.temperature,
        retriever_name,
    )

    def task():
        return _cached(
            cache,
            digest,
            lambda: score_factuality(kind, turn, judge_client, retriever),
            lambda value: value.to_dict(),
            FactualityResult.from_dict,
        )

    return task


def _assemble_result(spec, transcript, outcomes: dict) -> MetricResult:
    turn_entries: dict[int, object] = {}
    session_entry = None
    for item, value in outcomes.items():
        if item.metric_id != spec.id:
            continue
        if item.scope_key == "session":
            session_entry = value
        else:
            turn_entries[int(item.scope_key.split(":", 1)[1])] = value

    if isinstance(spec, RubricSpec):
        aggregates = aggregate(list(turn_entries.values())) if turn_entries else SessionAggregate(count=0)
        return MetricResult(
            metric_id=spec.id,
            family="rubric_based",
            turn_entries=turn_entries,
            session_entry=session_entry,
            aggregates=aggregates,
        )

    entries = list(turn_entries.values())
    aggregates = aggregate(entries) if entries else SessionAggregate(count=0)
    return MetricResult(
        metric_id=spec.id,
        family="model_based",
        predictor=spec.predictor,
        turn_entries=turn_entries,
        session_entry=session_entry,
        aggregates=aggregates,
    )


# --------------------------------------------------------------------------
# batch mode
# --------------------------------------------------------------------------

@dataclass
class BatchFileStatus:
    file: str
    status: str  # ok | parse_error | evaluation_error
    detail: str = ""
    report_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "file": self.file,
            "status": self.status,
            "detail": self.detail,
            "report_path": self.report_path,
        }


@dataclass
class BatchSummary:
    total: int
    succeeded: int
    failed: int
    files: list[BatchFileStatus]

    @property
    def all_ok(self) -> bool:
        return self.failed == 0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "succeeded": self.succeeded,
            "failed": self.failed,
            "files": [f.to_dict() for f in self.files],
        }


def sniff_format(path: Path) -> str:
    if path.suffix == ".txt":
        return "plain_text"
    try:
        head = path.read_text(errors="replace")
    except OSError:
        return "plain_text"
    if '"messages"' in head and '"turns"' not in head:
        return "chat_export"
    return "chat_json"


def run_batch(
    directory: Path | str,
    request_template: EvaluationRequest,
    out_dir: Path | str,
    registry: Registry,
    *,
    settings: EngineSettings | None = None,
    cache: ContentCache | None = None,
    transcript_format: str | None = None,
) -> BatchSummary:
    """Evaluate every transcript file in ``directory``.

    One ``{transcript_id}.report.json`` per parsed transcript; unparseable
    files are listed in the summary with reasons rather than aborting the
    batch.
    """

    from .report import report_to_json

    directory = Path(directory)
    out_dir = Path(out_dir)
    candidates = sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix in (".txt", ".json")
    )
    if not candidates:
        raise NoTranscriptsFound(f"no .txt or .json transcript files in {directory}")

    out_dir.mkdir(parents=True, exist_ok=True)
    statuses: list[BatchFileStatus] = []
    succeeded = 0
    retriever = None
    if settings is not None and settings.snippets_dir is not None:
        retriever = LocalSnippetRetriever(settings.snippets_dir)

    for path in candidates:
        fmt = transcript_format or sniff_format(path)
        try:
            transcript = parse_transcript(path.read_bytes(), fmt)
        except AuditError as exc:
            statuses.append(
                BatchFileStatus(file=path.name, status="parse_error", detail=str(exc))
            )
            continue
        request = EvaluationRequest(
            transcript=transcript,
            metric_ids=list(request_template.metric_ids),
            judge=request_template.judge,
            predictor_endpoints=dict(request_template.predictor_endpoints),
            max_concurrency=request_template.max_concurrency,
            scopes=request_template.scopes,
            use_mock=request_template.use_mock,
        )
        try:
            report = run_evaluation(
                request,
                registry,
                cache=cache,
                retriever=retriever,
                low_score_flag_max=settings.low_score_flag_max if settings else None,
                toxicity_flag_min=settings.toxicity_flag_min if settings else None,
            )
        except AuditError as exc:
            statuses.append(
                BatchFileStatus(file=path.name, status="evaluation_error", detail=str(exc))
            )
            continue
        report_path = out_dir / f"{transcript.id}.report.json"
        report_path.write_text(report_to_json(report))
        statuses.append(
            BatchFileStatus(file=path.name, status="ok", report_path=str(report_path))
        )
        succeeded += 1

    return BatchSummary(
        total=len(candidates),
        succeeded=succeeded,
        failed=len(candidates) - succeeded,
        files=statuses,
    )
