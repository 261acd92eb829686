"""Grounded follow-up questions over a finished evaluation report.

A local scope guard runs first: it selects report entries whose metric name,
category, turn index, label, or flagged status matches the question. With no
matches the query is refused before any backend call, which keeps the
zero-call refusal path testable. Answers must cite entries that exist;
uncitable answers are retried once and then refused.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import prompts
from .factuality import FactualityResult
from .judge import Rating, request_json
from .predictors import CategoricalPayload, RelationsPayload, ScoresPayload
from .registry import Registry
from .report import EvaluationReport

REFUSAL_OUT_OF_SCOPE = "out_of_scope"
REFUSAL_NO_RELEVANT = "no_relevant_results"


@dataclass(frozen=True)
class Citation:
    metric_id: str
    scope: str  # "session" | "turn:<i>"

    def to_dict(self) -> dict:
        return {"metric_id": self.metric_id, "scope": self.scope}


@dataclass(frozen=True)
class GroundedAnswer:
    text: str
    citations: tuple[Citation, ...]

    def __post_init__(self) -> None:
        if not self.citations:
            raise ValueError("grounded answers must carry at least one citation")

    def to_dict(self) -> dict:
        return {
            "kind": "answer",
            "text": self.text,
            "citations": [c.to_dict() for c in self.citations],
        }


@dataclass(frozen=True)
class Refusal:
    reason: str  # out_of_scope | no_relevant_results
    message: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("refusal message must be non-empty")

    def to_dict(self) -> dict:
        return {"kind": "refusal", "reason": self.reason, "message": self.message}


def _entry_detail(entry) -> str:
    if isinstance(entry, Rating):
        quoted = "; ".join(f"\"{ref.quote}\"" for ref in entry.evidence if ref.resolved)
        detail = f"score {entry.score}/5: {entry.justification}"
        return f"{detail} (evidence: {quoted})" if quoted else detail
    if isinstance(entry, CategoricalPayload):
        return f"label {entry.label} (confidence {entry.confidence:.2f})"
    if isinstance(entry, ScoresPayload):
        scores = ", ".join(f"{k}={v:.2f}" for k, v in entry.scores.items())
        return f"attribute scores: {scores}"
    if isinstance(entry, FactualityResult):
        if entry.score is None:
            return f"{len(entry.claims)} claim(s), no decidable verdicts"
        return f"factuality {entry.score:.2f} over {len(entry.claims)} claim(s)"
    if isinstance(entry, RelationsPayload):
        rels = "; ".join(
            f"turn {r.emotion_turn} caused by turn {r.cause_turn} (\"{r.cause_quote}\")"
            for r in entry.relations
        )
        return f"emotion-cause relations: {rels}"
    return str(entry)


@dataclass(frozen=True)
class _IndexedEntry:
    metric_id: str
    scope: str
    search_text: str  # lowercase haystack the guard matches against
    detail: str
    flagged: bool


def _index_report(report: EvaluationReport, registry: Registry | None) -> list[_IndexedEntry]:
    flagged_keys = {(f.metric_id, f"turn:{f.turn_index}") for f in report.flags}
    indexed: list[_IndexedEntry] = []
    for result in report.results:
        name = result.metric_id.replace("-", " ")
        category = ""
        if registry is not None and result.metric_id in registry:
            spec = registry.get(result.metric_id)
            name = spec.name
            category = spec.category
        base_terms = f"{result.metric_id} {name} {category} {result.family}".lower()

        entries: list[tuple[str, object]] = [
            (f"turn:{index}", entry) for index, entry in sorted(result.turn_entries.items())
        ]
        if result.session_entry is not None:
            entries.append(("session", result.session_entry))
        for scope, entry in entries:
            detail = _entry_detail(entry)
            flagged = (result.metric_id, scope) in flagged_keys
            label_terms = ""
            if isinstance(entry, CategoricalPayload):
                label_terms = entry.label.replace("-", " ")
            turn_terms = scope.replace(":", " ")
            search_text = " ".join(
                [base_terms, detail.lower(), label_terms.lower(), turn_terms,
                 "flagged" if flagged else ""]
            )
            indexed.append(
                _IndexedEntry(
                    metric_id=result.metric_id,
                    scope=scope,
                    search_text=search_text,
                    detail=detail,
                    flagged=flagged,
                )
            )
    return indexed


_STOP_WORDS = frozenset(
    "a an and are at be by did do does for from had has have how i in is it of on or "
    "s the this that to was what when where which who why with you your".split()
)

MAX_PROMPT_ENTRIES = 24


def _select_entries(question: str, indexed: list[_IndexedEntry]) -> list[_IndexedEntry]:
    words = {
        w for w in re.findall(r"[a-z0-9]+", question.lower()) if w not in _STOP_WORDS
    }
    numbers = set(re.findall(r"\d+", question))
    wants_flagged = bool({"flag", "flagged", "flags"} & words)

    selected: list[tuple[int, _IndexedEntry]] = []
    for entry in indexed:
        entry_words = set(re.findall(r"[a-z0-9]+", entry.search_text))
        overlap = len(words & entry_words)
        turn_match = entry.scope.startswith("turn:") and entry.scope.split(":")[1] in numbers
        if overlap == 0 and not turn_match and not (wants_flagged and entry.flagged):
            continue
        score = overlap + (3 if turn_match else 0) + (2 if wants_flagged and entry.flagged else 0)
        selected.append((score, entry))
    selected.sort(key=lambda pair: (-pair[0], pair[1].metric_id, pair[1].scope))
    return [entry for _, entry in selected[:MAX_PROMPT_ENTRIES]]


def _valid_citations(doc: dict, indexed: list[_IndexedEntry]) -> tuple[Citation, ...] | None:
    raw = doc.get("citations")
    if not isinstance(raw, list) or not raw:
        return None
    known = {(e.metric_id, e.scope) for e in indexed}
    citations = []
    for item in raw:
        if not isinstance(item, dict):
            return None
        key = (item.get("metric_id"), item.get("scope"))
        if key not in known:
            return None
        citations.append(Citation(metric_id=key[0], scope=key[1]))
    return tuple(citations)


def answer_query(
    report: EvaluationReport,
    question: str,
    judge_client,
    registry: Registry | None = None,
) -> GroundedAnswer | Refusal:
    """Answer from the evaluation record only; refuse anything beyond it."""

    if not question.strip():
        raise ValueError("question must be non-empty")

    indexed = _index_report(report, registry)
    selected = _select_entries(question, indexed)
    if not selected:
        return Refusal(
            reason=REFUSAL_NO_RELEVANT,
            message="No evaluation entries relate to this question; it may be outside "
            "the scope of this report.",
        )

    entry_payload = [
        {"metric_id": e.metric_id, "scope": e.scope, "detail": e.detail} for e in selected
    ]
    user = prompts.query_prompt(question.strip(), entry_payload)

    citations: tuple[Citation, ...] | None = None
    text = ""
    for _ in range(2):  # one retry for uncitable answers
        doc = request_json(
            judge_client,
            prompts.SYSTEM_ANALYST,
            user,
            judge_client.config.max_retries,
            validate=lambda d: None
            if isinstance(d.get("answer"), str) and isinstance(d.get("citations"), list)
            else "reply must contain 'answer' and a 'citations' list",
        )
        text = doc["answer"].strip()
        citations = _valid_citations(doc, selected)
        if text and citations:
            return GroundedAnswer(text=text, citations=citations)
        user = user + prompts.repair_suffix(
            "the answer must cite only the listed entries and must not be empty"
        )

    return Refusal(
        reason=REFUSAL_OUT_OF_SCOPE,
        message="The backend could not produce an answer grounded in the evaluation "
        "entries, so the question was refused.",
    )
