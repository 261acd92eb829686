"""Claim-level factuality scoring for supporter turns.

Pipeline: the judge decomposes a turn into atomic claims, a retriever gathers
evidence notes per claim, and the judge issues a verdict per claim. The score
is the supported fraction with abstentions excluded from the denominator; an
unreachable retriever therefore cannot masquerade as contradiction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .errors import JudgeFailure, RetrieverFailure, RoleMismatch
from .judge import request_json
from .transcript import SUPPORTER, Turn

VERDICTS = ("supported", "unsupported", "abstain")

# How many evidence snippets a claim verdict sees.
RETRIEVAL_TOP_K = 3


@dataclass(frozen=True)
class ClaimVerdict:
    claim_text: str
    verdict: str
    evidence_note: str

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")


def factuality_score(verdicts: list[str]) -> float | None:
    """Supported / (supported + unsupported); ``None`` when nothing decided."""

    supported = sum(1 for v in verdicts if v == "supported")
    unsupported = sum(1 for v in verdicts if v == "unsupported")
    decided = supported + unsupported
    if decided == 0:
        return None
    return supported / decided


@dataclass(frozen=True)
class FactualityResult:
    turn_index: int
    claims: tuple[ClaimVerdict, ...]
    score: float | None

    def __post_init__(self) -> None:
        expected = factuality_score([c.verdict for c in self.claims])
        if expected != self.score:
            raise ValueError(
                f"stored score {self.score} disagrees with recomputed {expected}"
            )

    def to_dict(self) -> dict:
        return {
            "kind": "factuality",
            "turn_index": self.turn_index,
            "claims": [
                {"text": c.claim_text, "verdict": c.verdict, "evidence_note": c.evidence_note}
                for c in self.claims
            ],
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FactualityResult":
        return cls(
            turn_index=int(doc["turn_index"]),
            claims=tuple(
                ClaimVerdict(c["text"], c["verdict"], c["evidence_note"])
                for c in doc.get("claims", [])
            ),
            score=doc.get("score"),
        )


class NullRetriever:
    """No evidence available; every claim ends in abstain."""

    name = "null"

    def retrieve(self, claim: str) -> list[str]:
        return []


class LocalSnippetRetriever:
    """Keyword-overlap retrieval over a directory of plain-text reference files.

    Files are split into paragraphs; a paragraph scores by how many distinct
    claim words it shares. Full-scale reference corpora (encyclopedias,
    clinical textbooks) are not shippable, so this gives local deployments a
    working slot-in.
    """

    name = "local-snippets"

    def __init__(self, directory: Path | str) -> None:
        self._dir = Path(directory)
        self._paragraphs: list[str] | None = None

    def _load(self) -> list[str]:
        if self._paragraphs is None:
            if not self._dir.is_dir():
                raise RetrieverFailure(f"snippet directory {self._dir} does not exist")
            paragraphs: list[str] = []
            for path in sorted(self._dir.glob("*.txt")):
                try:
                    text = path.read_text(encoding="utf-8")
                except OSError as exc:
                    raise RetrieverFailure(f"cannot read {path}: {exc}") from None
                for block in re.split(r"\n\s*\n", text):
                    block = " ".join(block.split())
                    if block:
                        paragraphs.append(block)
            self._paragraphs = paragraphs
        return self._paragraphs

    def retrieve(self, claim: str) -> list[str]:
        paragraphs = self._load()
        claim_words = {w for w in re.findall(r"[a-z0-9]+", claim.lower()) if len(w) > 2}
        if not claim_words:
            return []
        scored = []
        for i, paragraph in enumerate(paragraphs):
            para_words = set(re.findall(r"[a-z0-9]+", paragraph.lower()))
            overlap = len(claim_words & para_words)
            if overlap > 0:
                scored.append((-overlap, i, paragraph))
        scored.sort()
        return [p for _, _, p in scored[:RETRIEVAL_TOP_K]]


def _validate_claims(doc: dict) -> str | None:
    claims = doc.get("claims")
    if not isinstance(claims, list) or any(not isinstance(c, str) for c in claims):
        return "'claims' must be a list of strings"
    return None


def _validate_verdict(doc: dict) -> str | None:
    if doc.get("verdict") not in VERDICTS:
        return f"'verdict' must be one of {', '.join(VERDICTS)}"
    if not isinstance(doc.get("note", ""), str):
        return "'note' must be a string"
    return None


def score_factuality(kind: str, turn: Turn, judge_client, retriever) -> FactualityResult:
    """Run the claim pipeline on one supporter turn.

    Per-claim retriever or verdict failures degrade to abstain; only a failed
    decomposition aborts the whole result.
    """

    if kind not in ("fact_general", "fact_medical"):
        raise ValueError(f"kind must be a factuality kind, got {kind!r}")
    if turn.role != SUPPORTER:
        raise RoleMismatch(f"factuality targets supporter turns; turn {turn.index} is {turn.role}")

    domain = "clinical" if kind == "fact_medical" else "general"
    max_retries = judge_client.config.max_retries
    doc = request_json(
        judge_client,
        prompts.SYSTEM_ANALYST,
        prompts.claims_prompt(turn.text, domain),
        max_retries,
        validate=_validate_claims,
    )
    claim_texts = [c.strip() for c in doc["claims"] if c.strip()]

    claims: list[ClaimVerdict] = []
    for claim in claim_texts:
        try:
            notes = retriever.retrieve(claim)
        except RetrieverFailure as exc:
            claims.append(ClaimVerdict(claim, "abstain", f"retriever failure: {exc}"))
            continue
        if not notes:
            claims.append(ClaimVerdict(claim, "abstain", "no evidence retrieved"))
            continue
        try:
            verdict_doc = request_json(
                judge_client,
                prompts.SYSTEM_ANALYST,
                prompts.verdict_prompt(claim, notes),
                max_retries,
                validate=_validate_verdict,
            )
        except JudgeFailure as exc:
            claims.append(ClaimVerdict(claim, "abstain", f"verdict failed: {exc}"))
            continue
        claims.append(
            ClaimVerdict(claim, verdict_doc["verdict"], str(verdict_doc.get("note", "")))
        )

    return FactualityResult(
        turn_index=turn.index,
        claims=tuple(claims),
        score=factuality_score([c.verdict for c in claims]),
    )
