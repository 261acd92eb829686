"""Report assembly: aggregates, salient-turn flags, session summary, export.

The JSON export is the canonical schema and round-trips losslessly; CSV is a
flat per-turn-entry table (RFC 4180, every field quoted); HTML is a
standalone page with inline styles and SVG charts, safe to open offline.
"""

from __future__ import annotations

import csv
import html
import io
import json
import math
from dataclasses import dataclass, field

from . import prompts
from .cache import ContentCache, digest_of
from .errors import IoFailure, JudgeFailure, MixedPayloadTypes, NotPlottable
from .factuality import FactualityResult
from .judge import Rating, request_json
from .predictors import (
    CategoricalPayload,
    Payload,
    RelationsPayload,
    ScoresPayload,
    kind_schema,
    payload_from_dict,
    payload_to_dict,
)
from .registry import FAMILY_RUBRIC

# Default flag thresholds; overridable through engine config.
LOW_SCORE_FLAG_MAX = 2
TOXICITY_FLAG_MIN = 0.5

TOXICITY_KINDS = frozenset({"toxicity_a", "toxicity_b"})
# Categorical label sets with a meaningful order (index = intensity).
ORDINAL_KINDS = frozenset({"reflection", "epitome_er", "epitome_ip", "epitome_ex"})

TurnEntry = Rating | Payload | FactualityResult


@dataclass(frozen=True)
class NumericAggregate:
    mean: float
    min: float
    max: float

    def __post_init__(self) -> None:
        if not (self.min <= self.mean <= self.max):
            raise ValueError("aggregate must satisfy min <= mean <= max")


@dataclass(frozen=True)
class CategoricalAggregate:
    distribution: dict[str, float]
    mode: str

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.distribution.items())), self.mode))


@dataclass(frozen=True)
class SessionAggregate:
    count: int
    numeric: NumericAggregate | None = None
    categorical: CategoricalAggregate | None = None

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "numeric": (
                {"mean": self.numeric.mean, "min": self.numeric.min, "max": self.numeric.max}
                if self.numeric
                else None
            ),
            "categorical": (
                {
                    "distribution": dict(self.categorical.distribution),
                    "mode": self.categorical.mode,
                }
                if self.categorical
                else None
            ),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionAggregate":
        numeric = doc.get("numeric")
        categorical = doc.get("categorical")
        return cls(
            count=int(doc["count"]),
            numeric=NumericAggregate(**numeric) if numeric else None,
            categorical=(
                CategoricalAggregate(
                    distribution=dict(categorical["distribution"]), mode=categorical["mode"]
                )
                if categorical
                else None
            ),
        )


def _numeric_value(entry: TurnEntry) -> float | None:
    """Numeric view of an entry, or None when it has none (absent factuality)."""

    if isinstance(entry, Rating):
        return float(entry.score)
    if isinstance(entry, ScoresPayload):
        primary = next(iter(entry.scores))
        return float(entry.scores[primary])
    if isinstance(entry, FactualityResult):
        return float(entry.score) if entry.score is not None else None
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return float(entry)
    return None


def _entry_kind(entry: TurnEntry) -> str:
    if isinstance(entry, Rating):
        return "rating"
    if isinstance(entry, CategoricalPayload):
        return "categorical"
    if isinstance(entry, ScoresPayload):
        return "scores"
    if isinstance(entry, RelationsPayload):
        return "relations"
    if isinstance(entry, FactualityResult):
        return "factuality"
    if isinstance(entry, bool):
        return type(entry).__name__
    if isinstance(entry, (int, float)):
        return "number"
    if isinstance(entry, str):
        return "label"
    return type(entry).__name__


def aggregate(entries: list[TurnEntry]) -> SessionAggregate:
    """Session aggregate over homogeneous turn-level values.

    Numeric entries produce mean/min/max (mean via ``fsum`` so the result is
    permutation-invariant); categorical entries produce a label distribution
    and mode with lexicographic tie-breaking. Empty input gives count 0 with
    neither block.
    """

    if not entries:
        return SessionAggregate(count=0)

    kinds = {_entry_kind(e) for e in entries}
    if len(kinds) > 1:
        raise MixedPayloadTypes(f"cannot aggregate mixed entry kinds: {sorted(kinds)}")
    kind = kinds.pop()

    if kind in ("categorical", "label"):
        labels = [e.label if isinstance(e, CategoricalPayload) else e for e in entries]
        counts: dict[str, int] = {}
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
        total = len(labels)
        distribution = {label: counts[label] / total for label in sorted(counts)}
        mode = max(sorted(counts), key=lambda lbl: counts[lbl])
        return SessionAggregate(
            count=total,
            categorical=CategoricalAggregate(distribution=distribution, mode=mode),
        )

    if kind in ("rating", "scores", "factuality", "number"):
        values = [v for v in (_numeric_value(e) for e in entries) if v is not None]
        if not values:
            return SessionAggregate(count=0)
        ordered = sorted(values)
        return SessionAggregate(
            count=len(values),
            numeric=NumericAggregate(
                mean=math.fsum(ordered) / len(ordered), min=ordered[0], max=ordered[-1]
            ),
        )

    raise MixedPayloadTypes(f"cannot aggregate entries of kind {kind!r}")


@dataclass(frozen=True)
class MetricResult:
    """All outputs of one metric over one transcript."""

    metric_id: str
    family: str
    turn_entries: dict[int, TurnEntry]
    session_entry: TurnEntry | None
    aggregates: SessionAggregate
    predictor: str | None = None

    def __hash__(self) -> int:
        return hash((self.metric_id, self.family))

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id,
            "family": self.family,
            "predictor": self.predictor,
            "turn_entries": {
                str(index): entry_to_dict(entry)
                for index, entry in sorted(self.turn_entries.items())
            },
            "session_entry": entry_to_dict(self.session_entry) if self.session_entry else None,
            "aggregates": self.aggregates.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricResult":
        session = doc.get("session_entry")
        return cls(
            metric_id=doc["metric_id"],
            family=doc["family"],
            predictor=doc.get("predictor"),
            turn_entries={
                int(index): entry_from_dict(entry)
                for index, entry in doc.get("turn_entries", {}).items()
            },
            session_entry=entry_from_dict(session) if session else None,
            aggregates=SessionAggregate.from_dict(doc["aggregates"]),
        )


def entry_to_dict(entry: TurnEntry) -> dict:
    if isinstance(entry, Rating):
        return entry.to_dict()
    if isinstance(entry, FactualityResult):
        return entry.to_dict()
    if isinstance(entry, (CategoricalPayload, ScoresPayload, RelationsPayload)):
        return payload_to_dict(entry)
    raise TypeError(f"cannot serialize report entry of type {type(entry).__name__}")


def entry_from_dict(doc: dict) -> TurnEntry:
    kind = doc.get("kind")
    if kind == "rating":
        return Rating.from_dict(doc)
    if kind == "factuality":
        return FactualityResult.from_dict(doc)
    return payload_from_dict(doc)


@dataclass(frozen=True)
class FlaggedTurn:
    turn_index: int
    metric_id: str
    reason: str  # low_rubric_score | high_toxicity
    value: float

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "metric_id": self.metric_id,
            "reason": self.reason,
            "value": self.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FlaggedTurn":
        return cls(doc["turn_index"], doc["metric_id"], doc["reason"], doc["value"])


def flag_salient_turns(
    results: list[MetricResult],
    low_score_max: int = LOW_SCORE_FLAG_MAX,
    toxicity_min: float = TOXICITY_FLAG_MIN,
) -> list[FlaggedTurn]:
    """Turns worth a closer look: low rubric scores and toxicity crossings.

    Output is sorted by (turn, metric), so it is invariant under permutation
    of the input results.
    """

    flags: list[FlaggedTurn] = []
    for result in results:
        for index, entry in result.turn_entries.items():
            if isinstance(entry, Rating) and entry.score <= low_score_max:
                flags.append(
                    FlaggedTurn(index, result.metric_id, "low_rubric_score", float(entry.score))
                )
            elif (
                isinstance(entry, ScoresPayload)
                and result.predictor in TOXICITY_KINDS
            ):
                crossing = [v for v in entry.scores.values() if v >= toxicity_min]
                if crossing:
                    flags.append(
                        FlaggedTurn(index, result.metric_id, "high_toxicity", max(crossing))
                    )
    flags.sort(key=lambda f: (f.turn_index, f.metric_id))
    return flags


@dataclass(frozen=True)
class SessionSummary:
    text: str
    strengths: tuple[str, ...] = ()
    weaknesses: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "strengths": list(self.strengths),
            "weaknesses": list(self.weaknesses),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionSummary":
        return cls(
            text=doc.get("text", ""),
            strengths=tuple(doc.get("strengths", [])),
            weaknesses=tuple(doc.get("weaknesses", [])),
        )


STRENGTH_MEAN_MIN = 4.0
WEAKNESS_MEAN_MAX = 2.0


def _flagged_excerpts(results: list[MetricResult], flags: list[FlaggedTurn]) -> list[str]:
    flagged_turns = {f.turn_index for f in flags}
    excerpts = []
    for result in results:
        for index, entry in result.turn_entries.items():
            if index in flagged_turns and isinstance(entry, Rating):
                for ref in entry.evidence:
                    if ref.resolved:
                        excerpts.append(f"[turn {index}] {ref.quote}")
    return sorted(set(excerpts))


def summarize_session(
    results: list[MetricResult],
    flags: list[FlaggedTurn],
    judge_client,
    cache: ContentCache | None = None,
) -> SessionSummary:
    """Judge-written synthesis of aggregates and flags.

    The prompt sees only evaluation data (aggregates, flags, flagged
    excerpts), never raw transcript text. A judge failure degrades to an
    empty summary text; strengths and weaknesses are computed locally either
    way.
    """

    if not results:
        raise ValueError("summarize_session requires at least one metric result")

    def mean_of(result: MetricResult) -> float | None:
        return result.aggregates.numeric.mean if result.aggregates.numeric else None

    rubric_results = [r for r in results if r.family == FAMILY_RUBRIC]
    strengths = tuple(
        sorted(
            r.metric_id
            for r in rubric_results
            if mean_of(r) is not None and mean_of(r) >= STRENGTH_MEAN_MIN
        )
    )
    weaknesses = tuple(
        sorted(
            r.metric_id
            for r in rubric_results
            if mean_of(r) is not None and mean_of(r) <= WEAKNESS_MEAN_MAX
        )
    )

    payload = {
        "metrics": [
            {
                "metric_id": r.metric_id,
                "family": r.family,
                "aggregates": r.aggregates.to_dict(),
            }
            for r in results
        ],
        "strengths": list(strengths),
        "weaknesses": list(weaknesses),
        "flags": [f.to_dict() for f in flags],
        "flagged_excerpts": _flagged_excerpts(results, flags),
    }

    config = judge_client.config
    digest = digest_of(
        "summary",
        json.dumps(payload, sort_keys=True, ensure_ascii=False),
        config.fingerprint,
        config.temperature,
    )
    if cache is not None:
        stored = cache.get(digest)
        if stored is not None and isinstance(stored.get("summary"), str):
            return SessionSummary(text=stored["summary"], strengths=strengths, weaknesses=weaknesses)

    try:
        doc = request_json(
            judge_client,
            prompts.SYSTEM_ANALYST,
            prompts.summary_prompt(payload),
            config.max_retries,
            validate=lambda d: None if isinstance(d.get("summary"), str) else "'summary' must be a string",
        )
        text = doc["summary"]
    except JudgeFailure:
        return SessionSummary(text="", strengths=strengths, weaknesses=weaknesses)

    if cache is not None:
        cache.put(digest, {"summary": text})
    return SessionSummary(text=text, strengths=strengths, weaknesses=weaknesses)


@dataclass(frozen=True)
class EvaluationReport:
    report_id: str
    transcript_id: str
    created_at: str
    engine_version: str
    results: tuple[MetricResult, ...]
    errors: tuple["MetricError", ...]
    summary: SessionSummary
    flags: tuple[FlaggedTurn, ...]

    def __post_init__(self) -> None:
        ids = [r.metric_id for r in self.results]
        if len(ids) != len(set(ids)):
            raise ValueError("result metric_ids must be unique")
        known = set(ids)
        for flag in self.flags:
            if flag.metric_id not in known:
                raise ValueError(f"flag references unknown metric {flag.metric_id!r}")

    def result_for(self, metric_id: str) -> MetricResult | None:
        for result in self.results:
            if result.metric_id == metric_id:
                return result
        return None

    def to_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "transcript_id": self.transcript_id,
            "created_at": self.created_at,
            "engine_version": self.engine_version,
            "results": [r.to_dict() for r in self.results],
            "errors": [e.to_dict() for e in self.errors],
            "summary": self.summary.to_dict(),
            "flags": [f.to_dict() for f in self.flags],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvaluationReport":
        return cls(
            report_id=doc["report_id"],
            transcript_id=doc["transcript_id"],
            created_at=doc["created_at"],
            engine_version=doc["engine_version"],
            results=tuple(MetricResult.from_dict(r) for r in doc.get("results", [])),
            errors=tuple(MetricError.from_dict(e) for e in doc.get("errors", [])),
            summary=SessionSummary.from_dict(doc.get("summary", {})),
            flags=tuple(FlaggedTurn.from_dict(f) for f in doc.get("flags", [])),
        )


@dataclass(frozen=True)
class MetricError:
    metric_id: str
    stage: str  # predictor | judge | parse | aggregate
    message: str
    turn_index: int | None = None

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("error message must be non-empty")

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id,
            "stage": self.stage,
            "message": self.message,
            "turn_index": self.turn_index,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricError":
        return cls(doc["metric_id"], doc["stage"], doc["message"], doc.get("turn_index"))


# --------------------------------------------------------------------------
# time series
# --------------------------------------------------------------------------

def time_series(result: MetricResult) -> list[tuple[int, float]]:
    """Numeric series over turns for plotting.

    Rubric scores, attribute scores, and factuality map directly; ordinal
    label sets (reflection, the empathy heads) map to their label index.
    Nominal categorical metrics raise :class:`NotPlottable`.
    """

    points: list[tuple[int, float]] = []
    for index, entry in sorted(result.turn_entries.items()):
        if isinstance(entry, CategoricalPayload):
            if result.predictor not in ORDINAL_KINDS:
                raise NotPlottable(
                    f"metric {result.metric_id} has nominal labels; no numeric series"
                )
            labels = tuple(kind_schema(result.predictor)["labels"])
            points.append((index, float(labels.index(entry.label))))
        else:
            value = _numeric_value(entry)
            if value is not None:
                points.append((index, value))
    return points


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

CSV_HEADER = [
    "report_id",
    "metric_id",
    "family",
    "turn_index",
    "kind",
    "value",
    "label",
    "justification",
]


def _csv_row(report_id: str, result: MetricResult, index: int, entry: TurnEntry) -> list:
    kind = _entry_kind(entry)
    if isinstance(entry, Rating):
        return [report_id, result.metric_id, result.family, index, kind, entry.score, "", entry.justification]
    if isinstance(entry, CategoricalPayload):
        return [report_id, result.metric_id, result.family, index, kind, entry.confidence, entry.label, ""]
    if isinstance(entry, ScoresPayload):
        primary = next(iter(entry.scores))
        return [report_id, result.metric_id, result.family, index, kind, entry.scores[primary], primary, ""]
    if isinstance(entry, FactualityResult):
        value = "" if entry.score is None else entry.score
        return [report_id, result.metric_id, result.family, index, kind, value, "", ""]
    return [report_id, result.metric_id, result.family, index, kind, "", "", ""]


def report_to_csv(report: EvaluationReport) -> str:
    buffer = io.StringIO()
    # Justifications may contain newlines; quoting everything keeps the table
    # unambiguous under RFC 4180.
    writer = csv.writer(buffer, quoting=csv.QUOTE_ALL)
    writer.writerow(CSV_HEADER)
    for result in report.results:
        for index, entry in sorted(result.turn_entries.items()):
            writer.writerow(_csv_row(report.report_id, result, index, entry))
    return buffer.getvalue()


def report_to_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


def report_from_json(raw: str) -> EvaluationReport:
    return EvaluationReport.from_dict(json.loads(raw))


def _svg_chart(points: list[tuple[int, float]], y_min: float, y_max: float) -> str:
    width, height, pad = 560, 120, 8
    if not points:
        return ""
    xs = [p[0] for p in points]
    x_min, x_max = min(xs), max(xs)
    x_span = max(1, x_max - x_min)
    y_span = max(1e-9, y_max - y_min)

    def sx(x: float) -> float:
        return pad + (x - x_min) / x_span * (width - 2 * pad)

    def sy(y: float) -> float:
        return height - pad - (y - y_min) / y_span * (height - 2 * pad)

    coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in points)
    dots = "".join(
        f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="2.5" fill="#2b6cb0"/>' for x, y in points
    )
    return (
        f'<svg viewBox="0 0 {width} {height}" width="{width}" height="{height}" '
        f'role="img"><polyline points="{coords}" fill="none" stroke="#2b6cb0" '
        f'stroke-width="1.5"/>{dots}</svg>'
    )


_HTML_STYLE = """
body { font-family: system-ui, sans-serif; margin: 2rem auto; max-width: 60rem;
       color: #1a202c; line-height: 1.5; }
h1 { font-size: 1.4rem; } h2 { font-size: 1.1rem; margin-top: 2rem; }
.meta { color: #718096; font-size: .85rem; }
.card { border: 1px solid #e2e8f0; border-radius: 8px; padding: 1rem; margin: 1rem 0; }
.flag { background: #fff5f5; border-left: 3px solid #e53e3e; padding: .4rem .8rem;
        margin: .3rem 0; font-size: .9rem; }
.excerpt { background: #ebf8ff; padding: .2rem .4rem; border-radius: 4px; }
table { border-collapse: collapse; width: 100%; font-size: .85rem; }
th, td { border-bottom: 1px solid #e2e8f0; text-align: left; padding: .3rem .5rem; }
.badge { display: inline-block; border-radius: 10px; padding: 0 .5rem; font-size: .8rem;
         background: #edf2f7; margin-right: .3rem; }
"""


def report_to_html(report: EvaluationReport) -> str:
    """Standalone HTML rendering: summary, per-metric series, flagged excerpts."""

    esc = html.escape
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>Dialogue audit {esc(report.report_id)}</title>",
        f"<style>{_HTML_STYLE}</style></head><body>",
        f"<h1>Dialogue audit report</h1>",
        f'<p class="meta">report {esc(report.report_id)} · transcript '
        f"{esc(report.transcript_id)} · {esc(report.created_at)} · engine "
        f"{esc(report.engine_version)}</p>",
    ]

    parts.append('<div class="card"><h2>Session summary</h2>')
    parts.append(f"<p>{esc(report.summary.text) or '<em>no summary text</em>'}</p>")
    if report.summary.strengths:
        badges = "".join(f'<span class="badge">{esc(m)}</span>' for m in report.summary.strengths)
        parts.append(f"<p>Strengths: {badges}</p>")
    if report.summary.weaknesses:
        badges = "".join(f'<span class="badge">{esc(m)}</span>' for m in report.summary.weaknesses)
        parts.append(f"<p>Weaknesses: {badges}</p>")
    parts.append("</div>")

    if report.flags:
        parts.append("<h2>Flagged turns</h2>")
        for flag in report.flags:
            parts.append(
                f'<div class="flag">turn {flag.turn_index} · {esc(flag.metric_id)} · '
                f"{esc(flag.reason)} · value {flag.value:g}</div>"
            )

    parts.append("<h2>Metrics</h2>")
    for result in report.results:
        agg = result.aggregates
        parts.append(f'<div class="card"><h3>{esc(result.metric_id)}</h3>')
        parts.append(
            f'<p class="meta">{esc(result.family)} · {agg.count} turn-level entries</p>'
        )
        if agg.numeric:
            parts.append(
                f"<p>mean {agg.numeric.mean:.3g} · min {agg.numeric.min:g} · "
                f"max {agg.numeric.max:g}</p>"
            )
            try:
                points = time_series(result)
            except NotPlottable:
                points = []
            if points:
                is_rubric = result.family == FAMILY_RUBRIC
                y_min, y_max = (1.0, 5.0) if is_rubric else (0.0, 1.0)
                lo = min(p[1] for p in points)
                hi = max(p[1] for p in points)
                parts.append(_svg_chart(points, min(y_min, lo), max(y_max, hi)))
        if agg.categorical:
            rows = "".join(
                f"<tr><td>{esc(label)}</td><td>{fraction:.3f}</td></tr>"
                for label, fraction in agg.categorical.distribution.items()
            )
            parts.append(
                f"<table><tr><th>label</th><th>fraction</th></tr>{rows}</table>"
                f"<p>mode: {esc(agg.categorical.mode)}</p>"
            )
        # the directly judged session score sits beside the turn-level means
        if isinstance(result.session_entry, Rating):
            parts.append(
                f"<p>session-level score {result.session_entry.score}: "
                f"{esc(result.session_entry.justification)}</p>"
            )
        evidence_bits = []
        for index, entry in sorted(result.turn_entries.items()):
            if isinstance(entry, Rating):
                for ref in entry.evidence:
                    if ref.resolved:
                        evidence_bits.append(
                            f'<li>turn {index}: <span class="excerpt">{esc(ref.quote)}</span>'
                            f" — score {entry.score}</li>"
                        )
        if evidence_bits:
            parts.append("<ul>" + "".join(evidence_bits[:40]) + "</ul>")
        parts.append("</div>")

    parts.append("</body></html>")
    return "\n".join(parts)


def export(report: EvaluationReport, fmt: str, out_path) -> None:
    """Write the report to disk as json, csv, or html."""

    if fmt == "json":
        content = report_to_json(report)
    elif fmt == "csv":
        content = report_to_csv(report)
    elif fmt == "html":
        content = report_to_html(report)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    try:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(content)
    except OSError as exc:
        raise IoFailure(f"cannot write {out_path}: {exc}") from None
