"""Interactive custom-rubric authoring: draft, revise, calibrate, finalize.

A builder session wraps a judge-drafted rubric. Every transition revalidates
the draft against the registry schema with one automatic repair round before
surfacing an error, and persists the session so a UI can resume it. No
invalid rubric is ever registrable.
"""

from __future__ import annotations

import json
import logging
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import prompts
from .errors import DraftInvalid, ExampleInvalid, SessionFinalized
from .judge import request_json
from .registry import (
    RUBRIC_CATEGORIES,
    Registry,
    RubricSpec,
    rubric_from_dict,
    rubric_to_dict,
    validate_rubric,
)
from .transcript import Transcript, Turn, transcript_from_dict, transcript_to_dict

logger = logging.getLogger(__name__)

STATE_DRAFTING = "drafting"
STATE_FINALIZED = "finalized"
STATE_ABANDONED = "abandoned"

MAX_CALIBRATION_EXAMPLES = 10


@dataclass(frozen=True)
class CalibrationExample:
    """A short synthetic dialogue showing how the draft rubric applies."""

    dialogue_snippet: Transcript
    expected_score: int
    rationale: str

    def __post_init__(self) -> None:
        if not 2 <= len(self.dialogue_snippet.turns) <= 6:
            raise ValueError("calibration snippets need 2 to 6 turns")
        if not 1 <= self.expected_score <= 5:
            raise ValueError("expected_score must lie within the 1-5 scale")

    def to_dict(self) -> dict:
        return {
            "snippet": transcript_to_dict(self.dialogue_snippet),
            "expected_score": self.expected_score,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationExample":
        return cls(
            dialogue_snippet=transcript_from_dict(doc["snippet"]),
            expected_score=int(doc["expected_score"]),
            rationale=str(doc.get("rationale", "")),
        )


@dataclass
class BuilderSession:
    session_id: str
    description: str
    constraints: list[str]
    current_draft: RubricSpec
    history: list[tuple[str, int]] = field(default_factory=list)  # (feedback, version)
    state: str = STATE_DRAFTING
    examples: list[CalibrationExample] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "description": self.description,
            "constraints": list(self.constraints),
            "current_draft": rubric_to_dict(self.current_draft),
            "history": [list(item) for item in self.history],
            "state": self.state,
            "examples": [e.to_dict() for e in self.examples],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BuilderSession":
        return cls(
            session_id=doc["session_id"],
            description=doc["description"],
            constraints=list(doc.get("constraints", [])),
            current_draft=rubric_from_dict(doc["current_draft"], default_origin="custom"),
            history=[(f, int(v)) for f, v in doc.get("history", [])],
            state=doc.get("state", STATE_DRAFTING),
            examples=[CalibrationExample.from_dict(e) for e in doc.get("examples", [])],
        )


class SessionStore:
    """One JSON file per session under ``{state_dir}/sessions``."""

    def __init__(self, state_dir: Path | str) -> None:
        self._dir = Path(state_dir) / "sessions"

    def path(self, session_id: str) -> Path:
        return self._dir / f"{session_id}.json"

    def save(self, session: BuilderSession) -> None:
        self._dir.mkdir(parents=True, exist_ok=True)
        tmp = self.path(session.session_id).with_suffix(".tmp")
        tmp.write_text(json.dumps(session.to_dict(), indent=2, ensure_ascii=False) + "\n")
        tmp.replace(self.path(session.session_id))

    def load(self, session_id: str) -> BuilderSession:
        return BuilderSession.from_dict(json.loads(self.path(session_id).read_text()))

    def exists(self, session_id: str) -> bool:
        return self.path(session_id).exists()

    def delete(self, session_id: str) -> None:
        self.path(session_id).unlink(missing_ok=True)

    def list_ids(self) -> list[str]:
        if not self._dir.is_dir():
            return []
        return sorted(p.stem for p in self._dir.glob("*.json"))


def _draft_from_doc(doc: dict, version: int) -> tuple[RubricSpec | None, list[str]]:
    """Build and validate a custom RubricSpec from judge output."""

    try:
        cleaned = dict(doc)
        cleaned["origin"] = "custom"
        cleaned["version"] = version
        cleaned.setdefault("references", [])
        spec = rubric_from_dict(cleaned, default_origin="custom")
    except Exception as exc:  # malformed structure counts as a violation
        return None, [f"malformed-draft: {exc}"]
    violations = validate_rubric(spec)
    return (spec, violations) if not violations else (None, violations)


def _request_draft(client, user_prompt: str, version: int) -> RubricSpec:
    """One judge draft with one automatic repair round on validation failure."""

    doc = request_json(
        client, prompts.SYSTEM_AUTHOR, user_prompt, client.config.max_retries
    )
    spec, violations = _draft_from_doc(doc, version)
    if spec is not None:
        return spec

    repair = user_prompt + prompts.repair_suffix(
        "the rubric failed validation: " + "; ".join(violations)
    )
    doc = request_json(client, prompts.SYSTEM_AUTHOR, repair, client.config.max_retries)
    spec, violations = _draft_from_doc(doc, version)
    if spec is not None:
        return spec
    raise DraftInvalid(
        "draft still invalid after one repair round: " + "; ".join(violations),
        violations=violations,
    )


def draft_rubric(
    client,
    description: str,
    constraints: list[str] | None = None,
    store: SessionStore | None = None,
) -> BuilderSession:
    """Open a session with an initial judge-drafted rubric."""

    if not description.strip():
        raise ValueError("description must be non-empty")
    constraints = list(constraints or [])
    spec = _request_draft(
        client, prompts.draft_prompt(description, constraints, RUBRIC_CATEGORIES), version=1
    )
    session = BuilderSession(
        session_id=uuid.uuid4().hex[:12],
        description=description,
        constraints=constraints,
        current_draft=spec,
    )
    logger.debug("session %s drafted rubric %s", session.session_id, spec.id)
    if store is not None:
        store.save(session)
    return session


def revise_rubric(
    session: BuilderSession, feedback: str, client, store: SessionStore | None = None
) -> BuilderSession:
    """Apply one round of feedback; version increments, history appends."""

    if session.state != STATE_DRAFTING:
        raise SessionFinalized(f"session {session.session_id} is {session.state}")
    if not feedback.strip():
        raise ValueError("feedback must be non-empty")
    next_version = session.current_draft.version + 1
    draft_doc = rubric_to_dict(session.current_draft)
    spec = _request_draft(client, prompts.revise_prompt(draft_doc, feedback), next_version)
    # the judge may not change the id; the session owns it either way
    spec = replace(spec, id=session.current_draft.id)
    session.current_draft = spec
    session.history.append((feedback, next_version))
    if store is not None:
        store.save(session)
    return session


def _validate_examples_doc(doc: dict, n: int) -> str | None:
    examples = doc.get("examples")
    if not isinstance(examples, list) or len(examples) != n:
        return f"'examples' must be a list of exactly {n} items"
    scores = []
    for item in examples:
        if not isinstance(item, dict):
            return "example items must be objects"
        turns = item.get("turns")
        if not isinstance(turns, list) or not 2 <= len(turns) <= 6:
            return "each example needs 2 to 6 turns"
        for turn in turns:
            if not isinstance(turn, dict) or turn.get("role") not in ("seeker", "supporter"):
                return "turn roles must be seeker or supporter"
            if not isinstance(turn.get("text"), str) or not turn["text"].strip():
                return "turn text must be a non-empty string"
        score = item.get("expected_score")
        if isinstance(score, bool) or not isinstance(score, int) or not 1 <= score <= 5:
            return "expected_score must be an integer from 1 to 5"
        scores.append(score)
    if n >= 2 and not (any(s <= 3 for s in scores) and any(s >= 3 for s in scores)):
        return "expected scores must cover both the low and high halves of the scale"
    return None


def generate_calibration_examples(
    session: BuilderSession, n: int, client, store: SessionStore | None = None
) -> list[CalibrationExample]:
    """Synthetic demonstration snippets for the current draft."""

    if not 1 <= n <= MAX_CALIBRATION_EXAMPLES:
        raise ValueError(f"n must be between 1 and {MAX_CALIBRATION_EXAMPLES}")
    if session.state != STATE_DRAFTING:
        raise SessionFinalized(f"session {session.session_id} is {session.state}")

    # shape failures retry inside request_json; semantic problems get exactly
    # one repair round, like rubric drafts
    user = prompts.examples_prompt(rubric_to_dict(session.current_draft), n)
    doc = request_json(client, prompts.SYSTEM_AUTHOR, user, client.config.max_retries)
    problem = _validate_examples_doc(doc, n)
    if problem is not None:
        repair = user + prompts.repair_suffix(problem)
        doc = request_json(client, prompts.SYSTEM_AUTHOR, repair, client.config.max_retries)
        problem = _validate_examples_doc(doc, n)
        if problem is not None:
            raise ExampleInvalid(f"calibration examples unusable after one repair: {problem}")

    examples = []
    for item in doc["examples"]:
        turns = tuple(
            Turn(index=i, role=t["role"], text=t["text"].strip())
            for i, t in enumerate(item["turns"])
        )
        snippet = Transcript(
            id=f"cal-{session.session_id}-{len(examples)}", source="chat_json", turns=turns
        )
        examples.append(
            CalibrationExample(
                dialogue_snippet=snippet,
                expected_score=item["expected_score"],
                rationale=str(item.get("rationale", "")),
            )
        )
    session.examples = examples
    if store is not None:
        store.save(session)
    return examples


def finalize(
    session: BuilderSession, registry: Registry, store: SessionStore | None = None
) -> str:
    """Register the draft as a custom metric and freeze the session."""

    if session.state != STATE_DRAFTING:
        raise SessionFinalized(f"session {session.session_id} is {session.state}")
    metric_id = registry.register_custom(session.current_draft)
    logger.info("session %s finalized as custom metric %s", session.session_id, metric_id)
    session.state = STATE_FINALIZED
    if store is not None:
        store.save(session)
    return metric_id


def abandon(session: BuilderSession, store: SessionStore | None = None) -> None:
    if session.state == STATE_FINALIZED:
        raise SessionFinalized(f"session {session.session_id} is finalized")
    session.state = STATE_ABANDONED
    if store is not None:
        store.save(session)
