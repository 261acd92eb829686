"""Wire contract to task-specific predictors plus the deterministic mock.

Every model-based metric resolves to one predictor kind. Real predictors sit
behind ``POST {base_url}/predict``; the mock backend computes payloads from
UTF-8 byte sums so tests and offline runs are fully reproducible.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from threading import Lock

import requests

from .errors import (
    BadResponseSchema,
    EndpointUnreachable,
    PredictorTimeout,
    RoleMismatch,
)
from .transcript import SEEKER, SUPPORTER, Transcript, Turn, locate_quote
from .errors import QuoteNotFound, SpanOutOfRange

PREDICTOR_KINDS = (
    "epitome_er",
    "epitome_ip",
    "epitome_ex",
    "emotion_cls",
    "emotion_trigger",
    "talk_type",
    "support_strategy",
    "reflection",
    "toxicity_a",
    "toxicity_b",
    "fact_general",
    "fact_medical",
)

# Which role a kind scores; "both" means every turn is eligible.
KIND_TARGET_ROLE = {
    "epitome_er": SUPPORTER,
    "epitome_ip": SUPPORTER,
    "epitome_ex": SUPPORTER,
    "emotion_cls": SEEKER,
    "emotion_trigger": "both",
    "talk_type": SEEKER,
    "support_strategy": SUPPORTER,
    "reflection": SUPPORTER,
    "toxicity_a": "both",
    "toxicity_b": "both",
    "fact_general": SUPPORTER,
    "fact_medical": SUPPORTER,
}

# Predictors see at most this many preceding turns.
CONTEXT_WINDOW = 4

_URL_RE = re.compile(r"^https?://[^\s]+$")


@dataclass(frozen=True)
class PredictorEndpoint:
    kind: str
    base_url: str
    timeout_ms: int = 30_000
    auth_env: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in PREDICTOR_KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}")
        if not _URL_RE.match(self.base_url):
            raise ValueError(f"base_url {self.base_url!r} is not a valid http(s) URL")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")


@dataclass(frozen=True)
class CategoricalPayload:
    label: str
    confidence: float


@dataclass(frozen=True)
class ScoresPayload:
    scores: dict[str, float]

    def __hash__(self) -> int:  # dict field; hash on the sorted items
        return hash(tuple(sorted(self.scores.items())))


@dataclass(frozen=True)
class TriggerRelation:
    emotion_turn: int
    cause_turn: int
    cause_quote: str


@dataclass(frozen=True)
class RelationsPayload:
    relations: tuple[TriggerRelation, ...]


Payload = CategoricalPayload | ScoresPayload | RelationsPayload


@dataclass(frozen=True)
class PredictionResult:
    kind: str
    turn_index: int
    payload: Payload


_KIND_SCHEMAS: dict[str, dict] | None = None


def kind_schema(kind: str) -> dict:
    """Output schema (and label/attribute sets) for a predictor kind."""

    global _KIND_SCHEMAS
    if _KIND_SCHEMAS is None:
        raw = resources.files("dialogue_audit").joinpath("data/model_metrics.json").read_text()
        _KIND_SCHEMAS = {doc["predictor"]: doc for doc in json.loads(raw)}
    if kind not in _KIND_SCHEMAS:
        raise ValueError(f"unknown predictor kind {kind!r}")
    return _KIND_SCHEMAS[kind]


def byte_sum(text: str) -> int:
    return sum(text.encode("utf-8"))


def mock_predict(kind: str, text: str) -> Payload:
    """Deterministic stand-in for a predictor call.

    Categorical kinds pick ``byte-sum mod |labels|``; score kinds derive each
    attribute from the byte sum and the attribute's position. Equal inputs
    give equal outputs on every platform.
    """

    schema = kind_schema(kind)
    total = byte_sum(text)
    if schema["output_schema"] == "categorical":
        labels = schema["labels"]
        label = labels[total % len(labels)]
        confidence = 0.5 + (total % 50) / 100
        return CategoricalPayload(label=label, confidence=confidence)
    if schema["output_schema"] == "score01":
        attributes = schema["attributes"]
        scores = {
            attr: ((total + position) % 101) / 100
            for position, attr in enumerate(attributes)
        }
        return ScoresPayload(scores=scores)
    raise ValueError(f"mock_predict does not handle kind {kind!r}; use extract_triggers")


def mock_relations(transcript: Transcript) -> list[TriggerRelation]:
    """Deterministic emotion-cause relations: each seeker turn's emotion is
    attributed to the preceding turn (or itself at turn 0)."""

    relations = []
    for turn in transcript.turns:
        if turn.role != SEEKER:
            continue
        cause_index = max(0, turn.index - 1)
        cause_text = transcript.turns[cause_index].text
        first_line = cause_text.splitlines()[0]
        quote = " ".join(first_line.split()[:6])
        if not quote:
            continue
        relations.append(
            TriggerRelation(
                emotion_turn=turn.index, cause_turn=cause_index, cause_quote=quote
            )
        )
    return relations


def _validate_payload(kind: str, payload: Payload, turn_index: int | None = None) -> None:
    schema = kind_schema(kind)
    if schema["output_schema"] == "categorical":
        if not isinstance(payload, CategoricalPayload):
            raise BadResponseSchema(
                f"{kind} must return a label payload", kind=kind, turn_index=turn_index
            )
        if payload.label not in schema["labels"]:
            raise BadResponseSchema(
                f"label {payload.label!r} outside the registered set for {kind}",
                kind=kind,
                turn_index=turn_index,
            )
        if not 0.0 <= payload.confidence <= 1.0:
            raise BadResponseSchema(
                f"confidence {payload.confidence} outside [0, 1]",
                kind=kind,
                turn_index=turn_index,
            )
    elif schema["output_schema"] == "score01":
        if not isinstance(payload, ScoresPayload):
            raise BadResponseSchema(
                f"{kind} must return attribute scores", kind=kind, turn_index=turn_index
            )
        expected = set(schema["attributes"])
        if set(payload.scores) != expected:
            raise BadResponseSchema(
                f"attribute set {sorted(payload.scores)} != expected {sorted(expected)}",
                kind=kind,
                turn_index=turn_index,
            )
        for attr, value in payload.scores.items():
            if not 0.0 <= value <= 1.0:
                raise BadResponseSchema(
                    f"score {attr}={value} outside [0, 1]", kind=kind, turn_index=turn_index
                )


class MockPredictorClient:
    """In-process predictor backend; call-counted for cache assertions."""

    def __init__(self) -> None:
        self.calls = 0
        self._lock = Lock()

    def predict(self, kind: str, text: str, context: list[str]) -> Payload:
        with self._lock:
            self.calls += 1
        return mock_predict(kind, text)

    def relations(self, transcript: Transcript) -> list[TriggerRelation]:
        with self._lock:
            self.calls += 1
        return mock_relations(transcript)


class HttpPredictorClient:
    """Speaks the predictor wire contract against configured endpoints."""

    def __init__(self, endpoints: dict[str, PredictorEndpoint]) -> None:
        self._endpoints = endpoints
        self.calls = 0
        self._lock = Lock()

    def _post(self, kind: str, body: dict, turn_index: int | None) -> dict:
        endpoint = self._endpoints.get(kind)
        if endpoint is None:
            raise EndpointUnreachable(
                f"no endpoint configured for predictor {kind}", kind=kind, turn_index=turn_index
            )
        headers = {}
        if endpoint.auth_env:
            token = os.environ.get(endpoint.auth_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        with self._lock:
            self.calls += 1
        try:
            response = requests.post(
                endpoint.base_url.rstrip("/") + "/predict",
                json=body,
                headers=headers,
                timeout=endpoint.timeout_ms / 1000,
            )
        except requests.Timeout:
            raise PredictorTimeout(
                f"predictor {kind} timed out after {endpoint.timeout_ms} ms",
                kind=kind,
                turn_index=turn_index,
            ) from None
        except requests.RequestException as exc:
            raise EndpointUnreachable(
                f"predictor {kind} unreachable: {exc}", kind=kind, turn_index=turn_index
            ) from None
        if response.status_code != 200:
            raise EndpointUnreachable(
                f"predictor {kind} returned HTTP {response.status_code}",
                kind=kind,
                turn_index=turn_index,
            )
        try:
            return response.json()
        except ValueError:
            raise BadResponseSchema(
                f"predictor {kind} returned non-JSON body", kind=kind, turn_index=turn_index
            ) from None

    def predict(self, kind: str, text: str, context: list[str]) -> Payload:
        doc = self._post(kind, {"kind": kind, "text": text, "context": context}, None)
        if "label" in doc:
            try:
                return CategoricalPayload(
                    label=str(doc["label"]), confidence=float(doc["confidence"])
                )
            except (KeyError, TypeError, ValueError):
                raise BadResponseSchema(
                    f"predictor {kind}: malformed label payload", kind=kind
                ) from None
        if "scores" in doc:
            try:
                return ScoresPayload(
                    scores={str(k): float(v) for k, v in doc["scores"].items()}
                )
            except (AttributeError, TypeError, ValueError):
                raise BadResponseSchema(
                    f"predictor {kind}: malformed scores payload", kind=kind
                ) from None
        raise BadResponseSchema(
            f"predictor {kind}: response has neither 'label' nor 'scores'", kind=kind
        )

    def relations(self, transcript: Transcript) -> list[TriggerRelation]:
        from .transcript import serialize_transcript

        body = {
            "kind": "emotion_trigger",
            "text": serialize_transcript(transcript, "plain_text"),
            "context": [],
        }
        doc = self._post("emotion_trigger", body, None)
        raw = doc.get("relations")
        if not isinstance(raw, list):
            raise BadResponseSchema(
                "emotion_trigger: response missing 'relations' list", kind="emotion_trigger"
            )
        out = []
        for item in raw:
            try:
                out.append(
                    TriggerRelation(
                        emotion_turn=int(item["emotion_turn"]),
                        cause_turn=int(item["cause_turn"]),
                        cause_quote=str(item["cause_quote"]),
                    )
                )
            except (KeyError, TypeError, ValueError):
                raise BadResponseSchema(
                    "emotion_trigger: malformed relation entry", kind="emotion_trigger"
                ) from None
        return out


def context_for(transcript: Transcript, turn: Turn) -> list[str]:
    start = max(0, turn.index - CONTEXT_WINDOW)
    return [t.text for t in transcript.turns[start : turn.index]]


def predict_turn(client, kind: str, turn: Turn, context: list[str]) -> PredictionResult:
    """Run one predictor on one turn; role mismatches are rejected locally
    before any backend call."""

    target = KIND_TARGET_ROLE[kind]
    if target != "both" and turn.role != target:
        raise RoleMismatch(
            f"predictor {kind} targets {target} turns; turn {turn.index} is {turn.role}"
        )
    payload = client.predict(kind, turn.text, list(context[-CONTEXT_WINDOW:]))
    _validate_payload(kind, payload, turn_index=turn.index)
    return PredictionResult(kind=kind, turn_index=turn.index, payload=payload)


def extract_triggers(client, transcript: Transcript) -> list[PredictionResult]:
    """Emotion-cause relations over a whole transcript.

    Every returned relation is verified locally: indices must address real
    turns and the cause quote must locate inside the named cause turn.
    """

    if not transcript.turns_for_role(SEEKER):
        raise RoleMismatch("emotion_trigger requires at least one seeker turn")
    relations = client.relations(transcript)
    results = []
    for relation in relations:
        for index in (relation.emotion_turn, relation.cause_turn):
            if index < 0 or index >= len(transcript.turns):
                raise BadResponseSchema(
                    f"relation names turn {index}, transcript has "
                    f"{len(transcript.turns)} turns",
                    kind="emotion_trigger",
                )
        try:
            locate_quote(transcript, relation.cause_turn, relation.cause_quote)
        except (QuoteNotFound, SpanOutOfRange):
            raise BadResponseSchema(
                f"cause quote {relation.cause_quote[:40]!r} not found in turn "
                f"{relation.cause_turn}",
                kind="emotion_trigger",
            ) from None
        results.append(
            PredictionResult(
                kind="emotion_trigger",
                turn_index=relation.emotion_turn,
                payload=RelationsPayload(relations=(relation,)),
            )
        )
    return results


# -- serialization ----------------------------------------------------------

def payload_to_dict(payload: Payload) -> dict:
    if isinstance(payload, CategoricalPayload):
        return {"kind": "categorical", "label": payload.label, "confidence": payload.confidence}
    if isinstance(payload, ScoresPayload):
        return {"kind": "scores", "scores": dict(payload.scores)}
    return {
        "kind": "relations",
        "relations": [
            {"emotion_turn": r.emotion_turn, "cause_turn": r.cause_turn, "cause_quote": r.cause_quote}
            for r in payload.relations
        ],
    }


def payload_from_dict(doc: dict) -> Payload:
    kind = doc.get("kind")
    if kind == "categorical":
        return CategoricalPayload(label=doc["label"], confidence=doc["confidence"])
    if kind == "scores":
        return ScoresPayload(scores=dict(doc["scores"]))
    if kind == "relations":
        return RelationsPayload(
            relations=tuple(
                TriggerRelation(r["emotion_turn"], r["cause_turn"], r["cause_quote"])
                for r in doc["relations"]
            )
        )
    raise ValueError(f"unknown payload kind {kind!r}")
