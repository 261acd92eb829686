"""Rubric scoring through configurable LLM-judge backends.

A judge call assembles the rubric (definition, scale, anchors) and the scoped
dialogue into a prompt, expects a small JSON object back, repairs malformed
replies with a retry suffix, binds evidence quotes to character spans, and
caches finished ratings content-addressed on disk.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from threading import Lock
from typing import Callable

import requests

from . import prompts
from .cache import ContentCache, digest_of
from .errors import (
    AuthMissing,
    BackendUnreachable,
    JudgeFailure,
    ParseFailure,
    QuoteNotFound,
    SpanOutOfRange,
)
from .prompts import PROMPT_TEMPLATE_VERSION
from .registry import RubricSpec
from .transcript import Transcript, locate_quote
from .predictors import byte_sum

logger = logging.getLogger(__name__)

JUDGE_TIMEOUT_SECONDS = 60.0


@dataclass(frozen=True)
class JudgeBackendConfig:
    """Wire-level description of a chat-completion-style judge backend."""

    endpoint_url: str
    model_name: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    max_retries: int = 2
    api_key_env: str | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")
        if not 0 <= self.max_retries <= 5:
            raise ValueError("max_retries must be between 0 and 5")

    @property
    def fingerprint(self) -> str:
        return f"{self.model_name}:{PROMPT_TEMPLATE_VERSION}"


@dataclass(frozen=True)
class Scope:
    """What a rating covers: one turn or the whole session."""

    kind: str  # "turn" | "session"
    turn_index: int | None = None

    @classmethod
    def session(cls) -> "Scope":
        return cls(kind="session")

    @classmethod
    def turn(cls, index: int) -> "Scope":
        return cls(kind="turn", turn_index=index)

    def key(self) -> str:
        return "session" if self.kind == "session" else f"turn:{self.turn_index}"

    @classmethod
    def from_key(cls, key: str) -> "Scope":
        if key == "session":
            return cls.session()
        if key.startswith("turn:"):
            return cls.turn(int(key.split(":", 1)[1]))
        raise ValueError(f"bad scope key {key!r}")


@dataclass(frozen=True)
class EvidenceRef:
    """An evidence quote, bound to a span when it could be located.

    Unbindable quotes are kept as text and flagged unresolved instead of
    failing the rating.
    """

    turn_index: int
    quote: str
    char_start: int | None = None
    char_end: int | None = None
    resolved: bool = False

    def to_dict(self) -> dict:
        return {
            "turn": self.turn_index,
            "quote": self.quote,
            "start": self.char_start,
            "end": self.char_end,
            "resolved": self.resolved,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvidenceRef":
        return cls(
            turn_index=int(doc["turn"]),
            quote=str(doc["quote"]),
            char_start=doc.get("start"),
            char_end=doc.get("end"),
            resolved=bool(doc.get("resolved", False)),
        )


@dataclass(frozen=True)
class Rating:
    """One scored rubric judgment for one scope."""

    metric_id: str
    metric_version: int
    scope: Scope
    score: int
    justification: str
    evidence: tuple[EvidenceRef, ...]
    backend_fingerprint: str

    def __post_init__(self) -> None:
        if not isinstance(self.score, int) or isinstance(self.score, bool):
            raise ValueError("rating score must be an integer")
        if not 1 <= self.score <= 5:
            raise ValueError(f"rating score {self.score} outside the 1-5 scale")
        if not self.justification.strip():
            raise ValueError("rating justification must be non-empty")

    def to_dict(self) -> dict:
        return {
            "kind": "rating",
            "metric_id": self.metric_id,
            "metric_version": self.metric_version,
            "scope": self.scope.key(),
            "score": self.score,
            "justification": self.justification,
            "evidence": [ref.to_dict() for ref in self.evidence],
            "backend_fingerprint": self.backend_fingerprint,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Rating":
        return cls(
            metric_id=str(doc["metric_id"]),
            metric_version=int(doc["metric_version"]),
            scope=Scope.from_key(doc["scope"]),
            score=doc["score"],
            justification=str(doc["justification"]),
            evidence=tuple(EvidenceRef.from_dict(e) for e in doc.get("evidence", [])),
            backend_fingerprint=str(doc["backend_fingerprint"]),
        )


# --------------------------------------------------------------------------
# output parsing
# --------------------------------------------------------------------------

def extract_first_json(raw: str) -> dict | None:
    """First balanced-brace object in ``raw`` that parses as JSON.

    Brace tracking skips string contents, so prose-wrapped objects and quotes
    containing braces both work.
    """

    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = raw[start : i + 1]
                    try:
                        doc = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(doc, dict):
                        return doc
                    break
        start = raw.find("{", start + 1)
    return None


def parse_judge_output(raw: str, spec: RubricSpec) -> tuple[int, str, list[tuple[int, str]]]:
    """Validate a judge reply against the rating schema.

    Returns ``(score, justification, [(turn, quote), ...])`` or raises
    :class:`ParseFailure` with one of the documented reasons. Non-integer
    scores are rejected, never rounded.
    """

    doc = extract_first_json(raw)
    if doc is None:
        raise ParseFailure("no_json", "no JSON object found in the reply")

    if "score" not in doc:
        raise ParseFailure("bad_schema", "missing required key 'score'")
    score = doc["score"]
    if isinstance(score, bool) or not isinstance(score, int):
        raise ParseFailure("bad_schema", f"score must be an integer, got {score!r}")
    if not spec.scale_min <= score <= spec.scale_max:
        raise ParseFailure(
            "score_out_of_range",
            f"score {score} outside [{spec.scale_min}, {spec.scale_max}]",
        )

    justification = doc.get("justification")
    if justification is None or not isinstance(justification, str):
        raise ParseFailure("bad_schema", "missing or non-string 'justification'")
    if not justification.strip():
        raise ParseFailure("empty_justification", "justification is empty")

    quotes: list[tuple[int, str]] = []
    evidence = doc.get("evidence", [])
    if not isinstance(evidence, list):
        raise ParseFailure("bad_schema", "'evidence' must be a list")
    for item in evidence:
        if not isinstance(item, dict):
            raise ParseFailure("bad_schema", "evidence items must be objects")
        turn = item.get("turn")
        quote = item.get("quote")
        if isinstance(turn, bool) or not isinstance(turn, int) or turn < 0:
            raise ParseFailure("bad_schema", f"evidence turn must be a non-negative integer, got {turn!r}")
        if not isinstance(quote, str) or not quote.strip():
            raise ParseFailure("bad_schema", "evidence quote must be a non-empty string")
        quotes.append((turn, quote))

    return score, justification.strip(), quotes


# --------------------------------------------------------------------------
# prompt assembly
# --------------------------------------------------------------------------

def scope_line(spec: RubricSpec, scope: Scope, transcript: Transcript) -> str:
    if scope.kind == "session":
        return (
            "Rate the supporter's behavior across the whole session. Session-level "
            "ratings may cite no excerpt (empty evidence list)."
        )
    role = transcript.turns[scope.turn_index].role
    return f"Rate {role} turn {scope.turn_index} only, in the context of the dialogue."


def build_judge_prompt(spec: RubricSpec, transcript: Transcript, scope: Scope) -> str:
    """Deterministic rating prompt: definition, anchors, scale, scoped dialogue."""

    if scope.kind == "turn":
        if scope.turn_index is None or not 0 <= scope.turn_index < len(transcript.turns):
            raise SpanOutOfRange(f"scope turn {scope.turn_index} not in transcript")
    anchors = {a.level: a.description for a in spec.anchors}
    return prompts.rating_prompt(
        metric_id=spec.id,
        name=spec.name,
        definition=spec.definition,
        anchors=anchors,
        scale_min=spec.scale_min,
        scale_max=spec.scale_max,
        transcript=transcript,
        scope_line=scope_line(spec, scope, transcript),
    )


def scoped_text(transcript: Transcript, scope: Scope) -> str:
    if scope.kind == "turn":
        return transcript.turns[scope.turn_index].text
    return "\n".join(t.text for t in transcript.turns)


def rating_cache_key(
    spec: RubricSpec, scope: Scope, span_text: str, fingerprint: str, temperature: float
) -> str:
    return digest_of("rating", spec.id, spec.version, scope.key(), span_text, fingerprint, temperature)


# --------------------------------------------------------------------------
# backends
# --------------------------------------------------------------------------

class HttpJudgeClient:
    """Chat-completion wire client; covers hosted providers and local servers."""

    def __init__(self, config: JudgeBackendConfig) -> None:
        self.config = config
        self.calls = 0
        self._lock = Lock()

    def complete(self, system: str, user: str) -> str:
        headers = {}
        if self.config.api_key_env:
            token = os.environ.get(self.config.api_key_env)
            if not token:
                raise AuthMissing(
                    f"environment variable {self.config.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        with self._lock:
            self.calls += 1
        try:
            response = requests.post(
                self.config.endpoint_url,
                json=body,
                headers=headers,
                timeout=JUDGE_TIMEOUT_SECONDS,
            )
        except requests.RequestException as exc:
            raise BackendUnreachable(f"judge backend unreachable: {exc}") from None
        if response.status_code != 200:
            raise BackendUnreachable(
                f"judge backend returned HTTP {response.status_code}"
            )
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise BackendUnreachable(
                "judge response missing choices[0].message.content"
            ) from None


MOCK_JUDGE_CONFIG = JudgeBackendConfig(
    endpoint_url="http://mock.invalid/v1/chat/completions",
    model_name="mock-judge",
)

_CALIBRATION_SCORES = (2, 5, 3, 1, 4, 2, 5, 1, 4, 3)


class MockJudgeClient:
    """Deterministic judge for tests and fully offline runs.

    Detects the task from the instruction block embedded in the prompt and
    derives every output from UTF-8 byte sums, so identical prompts always
    yield identical replies across processes and platforms.
    """

    def __init__(self, config: JudgeBackendConfig = MOCK_JUDGE_CONFIG) -> None:
        self.config = config
        self.calls = 0
        self._lock = Lock()

    def complete(self, system: str, user: str) -> str:
        with self._lock:
            self.calls += 1
        if prompts.RATING_INSTRUCTION in user:
            return self._rate(user)
        if prompts.DRAFT_INSTRUCTION in user:
            return self._draft(user)
        if prompts.EXAMPLES_INSTRUCTION in user:
            return self._examples(user)
        if prompts.CLAIMS_INSTRUCTION in user:
            return self._claims(user)
        if prompts.VERDICT_INSTRUCTION in user:
            return self._verdict(user)
        if prompts.SUMMARY_INSTRUCTION in user:
            return self._summary(user)
        if prompts.QUERY_INSTRUCTION in user:
            return self._query(user)
        return json.dumps({"error": "unrecognized task"})

    # -- task handlers ------------------------------------------------------

    def _rate(self, user: str) -> str:
        header = re.search(r"^Rubric: .* \(([a-z0-9-]+)\)$", user, flags=re.MULTILINE)
        metric_id = header.group(1) if header else "unknown"
        turn_match = re.search(r"Rate (?:seeker|supporter) turn (\d+) only", user)
        evidence = []
        if turn_match is not None:
            index = int(turn_match.group(1))
            line = re.search(
                rf"^\[turn {index}\] (?:seeker|supporter): (.*)$", user, flags=re.MULTILINE
            )
            text = line.group(1) if line else ""
            quote = " ".join(text.split()[:5])
            if quote:
                evidence.append({"turn": index, "quote": quote})
            seed = text
        else:
            seed = user
        score = 1 + (byte_sum(metric_id + seed) % 5)
        return json.dumps(
            {
                "score": score,
                "justification": f"Deterministic mock rating for {metric_id}: "
                f"anchor level {score} fits best.",
                "evidence": evidence,
            }
        )

    def _draft(self, user: str) -> str:
        from .registry import RUBRIC_CATEGORIES

        revising = extract_first_json(user)
        feedback = re.search(r"^Feedback: (.*)$", user, flags=re.MULTILINE)
        if revising is not None and feedback is not None:
            draft = dict(revising)
            draft["definition"] = (
                f"{draft.get('definition', '')} Revision note: {feedback.group(1)}".strip()
            )
            draft.pop("origin", None)
            draft.pop("version", None)
            draft.pop("authored", None)
            return json.dumps(draft)

        desc_match = re.search(r"^Construct description: (.*)$", user, flags=re.MULTILINE)
        description = desc_match.group(1) if desc_match else "custom construct"
        words = re.findall(r"[a-z0-9]+", description.lower())[:4]
        metric_id = "-".join(words) or "custom-metric"
        name = " ".join(w.capitalize() for w in words) or "Custom Metric"
        category = RUBRIC_CATEGORIES[byte_sum(description) % len(RUBRIC_CATEGORIES)]
        return json.dumps(
            {
                "id": metric_id,
                "name": name,
                "category": category,
                "definition": f"Rates the supporter on: {description}",
                "scale": {"min": 1, "max": 5},
                "anchors": [
                    {
                        "level": 1,
                        "label": "low",
                        "description": "The described behavior is absent or contradicted.",
                    },
                    {
                        "level": 3,
                        "label": "medium",
                        "description": "The described behavior appears inconsistently or superficially.",
                    },
                    {
                        "level": 5,
                        "label": "high",
                        "description": "The described behavior is consistently and skillfully present.",
                    },
                ],
                "references": [],
            }
        )

    def _examples(self, user: str) -> str:
        count_match = re.search(r"^Write (\d+) short synthetic", user, flags=re.MULTILINE)
        n = int(count_match.group(1)) if count_match else 2
        draft = extract_first_json(user) or {}
        name = draft.get("name", "the construct")
        examples = []
        for k in range(n):
            score = _CALIBRATION_SCORES[k % len(_CALIBRATION_SCORES)]
            examples.append(
                {
                    "turns": [
                        {"role": "seeker", "text": f"I have been struggling lately, case {k + 1}."},
                        {
                            "role": "supporter",
                            "text": f"Mock supporter reply illustrating {name} at level {score}.",
                        },
                    ],
                    "expected_score": score,
                    "rationale": f"Illustrates {name} at anchor level {score}.",
                }
            )
        return json.dumps({"examples": examples})

    def _claims(self, user: str) -> str:
        body = user.split("Message: ", 1)[-1].rsplit(prompts.CLAIMS_INSTRUCTION, 1)[0].strip()
        sentences = re.split(r"(?<=[.!?])\s+", body)
        claims = [
            s.strip()
            for s in sentences
            if s.strip().endswith(".") and len(s.split()) >= 4
        ]
        return json.dumps({"claims": claims})

    def _verdict(self, user: str) -> str:
        claim_match = re.search(r"^Claim: (.*)$", user, flags=re.MULTILINE)
        claim = claim_match.group(1) if claim_match else ""
        verdict = ("supported", "unsupported", "abstain")[byte_sum(claim) % 3]
        return json.dumps({"verdict": verdict, "note": f"Deterministic mock verdict for: {claim[:40]}"})

    def _summary(self, user: str) -> str:
        payload = extract_first_json(user) or {}
        metrics = payload.get("metrics", [])
        strengths = payload.get("strengths", [])
        weaknesses = payload.get("weaknesses", [])
        flags = payload.get("flags", [])
        text = (
            f"Mock session summary over {len(metrics)} metrics. "
            f"Strengths: {', '.join(strengths) if strengths else 'none identified'}. "
            f"Weaknesses: {', '.join(weaknesses) if weaknesses else 'none identified'}. "
            f"{len(flags)} turn(s) were flagged for attention."
        )
        return json.dumps({"summary": text})

    def _query(self, user: str) -> str:
        entries = re.findall(r"^- ([a-z0-9-]+) \[([^\]]+)\] (.*)$", user, flags=re.MULTILINE)
        if not entries:
            return json.dumps({"answer": "", "citations": []})
        metric_id, scope, detail = entries[0]
        return json.dumps(
            {
                "answer": f"According to the evaluation record, {metric_id} at {scope}: {detail}",
                "citations": [{"metric_id": metric_id, "scope": scope}],
            }
        )


# --------------------------------------------------------------------------
# retried JSON requests (shared by builder/factuality/report/query)
# --------------------------------------------------------------------------

def request_json(
    client,
    system: str,
    user: str,
    max_retries: int,
    validate: Callable[[dict], str | None] | None = None,
) -> dict:
    """Call the judge until it returns a JSON object passing ``validate``.

    Performs exactly ``1 + max_retries`` calls before giving up with
    :class:`JudgeFailure`; never fabricates a result.
    """

    prompt = user
    attempts = 0
    last_problem = "no JSON object in reply"
    for _ in range(max_retries + 1):
        raw = client.complete(system, prompt)
        attempts += 1
        doc = extract_first_json(raw)
        if doc is None:
            last_problem = "no JSON object in reply"
        else:
            problem = validate(doc) if validate is not None else None
            if problem is None:
                return doc
            last_problem = problem
        prompt = user + prompts.repair_suffix(last_problem)
    raise JudgeFailure(
        f"judge output unusable after {attempts} calls: {last_problem}", attempts=attempts
    )


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def bind_evidence(
    transcript: Transcript, quotes: list[tuple[int, str]]
) -> tuple[EvidenceRef, ...]:
    refs = []
    for turn_index, quote in quotes:
        try:
            span = locate_quote(transcript, turn_index, quote)
        except (QuoteNotFound, SpanOutOfRange):
            refs.append(EvidenceRef(turn_index=turn_index, quote=quote, resolved=False))
            continue
        refs.append(
            EvidenceRef(
                turn_index=span.turn_index,
                quote=quote,
                char_start=span.char_start,
                char_end=span.char_end,
                resolved=True,
            )
        )
    return tuple(refs)


def evaluate_rubric(
    client,
    spec: RubricSpec,
    transcript: Transcript,
    scope: Scope,
    cache: ContentCache | None = None,
) -> Rating:
    """Score one rubric at one scope, with caching, repair, and retries.

    A cache hit returns the stored rating with zero backend calls. Parse
    failures are retried with a repair suffix naming the violated rule, up to
    ``max_retries``; exhaustion raises :class:`JudgeFailure`, never a
    fabricated score.
    """

    config = client.config
    prompt = build_judge_prompt(spec, transcript, scope)
    digest = rating_cache_key(
        spec, scope, scoped_text(transcript, scope), config.fingerprint, config.temperature
    )
    if cache is not None:
        stored = cache.get(digest)
        if stored is not None:
            try:
                rating = Rating.from_dict(stored)
                logger.debug("cache hit for %s at %s", spec.id, scope.key())
                return rating
            except (KeyError, ValueError, TypeError):
                logger.warning("discarding corrupt cache entry %s", digest[:12])

    user = prompt
    attempts = 0
    last: ParseFailure | None = None
    for _ in range(config.max_retries + 1):
        raw = client.complete(prompts.SYSTEM_RATER, user)
        attempts += 1
        try:
            score, justification, quotes = parse_judge_output(raw, spec)
        except ParseFailure as failure:
            last = failure
            logger.warning(
                "judge reply for %s at %s failed to parse (%s); retrying",
                spec.id, scope.key(), failure.reason,
            )
            user = prompt + prompts.repair_suffix(str(failure))
            continue
        rating = Rating(
            metric_id=spec.id,
            metric_version=spec.version,
            scope=scope,
            score=score,
            justification=justification,
            evidence=bind_evidence(transcript, quotes),
            backend_fingerprint=config.fingerprint,
        )
        if cache is not None:
            cache.put(digest, rating.to_dict())
        return rating

    reason = last.reason if last is not None else "unknown"
    raise JudgeFailure(
        f"judge output for {spec.id} unusable after {attempts} calls: {reason}",
        attempts=attempts,
    )
