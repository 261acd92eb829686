"""Prompt templates for every judge-backed operation.

Templates are versioned: the template version is folded into each rating's
backend fingerprint so prompt changes are auditable. All builders are pure
functions of their inputs; two calls with equal inputs produce byte-identical
prompts.
"""

from __future__ import annotations

import json

from .transcript import Transcript

PROMPT_TEMPLATE_VERSION = "v1"

SYSTEM_RATER = (
    "You rate the quality of mental-health support dialogues against a rubric. "
    "Reply with a single JSON object and nothing else."
)
SYSTEM_AUTHOR = (
    "You help design evaluation rubrics for mental-health support dialogues. "
    "Reply with a single JSON object and nothing else."
)
SYSTEM_ANALYST = (
    "You analyze structured evaluation results for mental-health support dialogues. "
    "Reply with a single JSON object and nothing else."
)

RATING_INSTRUCTION = (
    'Return a JSON object only: {"score": <integer>, "justification": "<one or two '
    'sentences>", "evidence": [{"turn": <turn index>, "quote": "<verbatim excerpt '
    'from that turn>"}]}. Quotes must be copied exactly from the dialogue.'
)

DRAFT_INSTRUCTION = (
    'Return a JSON object only, matching this schema exactly: {"id": "<kebab-case-id>", '
    '"name": "<metric name>", "category": "<one of the listed categories>", '
    '"definition": "<what is being rated>", "scale": {"min": 1, "max": 5}, '
    '"anchors": [{"level": 1, "label": "low", "description": "..."}, '
    '{"level": 3, "label": "medium", "description": "..."}, '
    '{"level": 5, "label": "high", "description": "..."}], "references": []}'
)

EXAMPLES_INSTRUCTION = (
    'Return a JSON object only: {"examples": [{"turns": [{"role": "seeker"|"supporter", '
    '"text": "..."}], "expected_score": <integer 1-5>, "rationale": "..."}]}. '
    "Each example needs 2 to 6 turns. Expected scores must span both the low and "
    "high halves of the scale."
)

CLAIMS_INSTRUCTION = (
    'Return a JSON object only: {"claims": ["<atomic verifiable claim>", ...]}. '
    "List only checkable factual assertions; emotional or supportive content that "
    "asserts no fact yields an empty list."
)

VERDICT_INSTRUCTION = (
    'Return a JSON object only: {"verdict": "supported"|"unsupported"|"abstain", '
    '"note": "<which evidence decided it>"}. Answer "abstain" when the evidence is '
    "insufficient to decide."
)

SUMMARY_INSTRUCTION = (
    'Return a JSON object only: {"summary": "<3-6 sentence synthesis of the '
    "evaluation: overall quality, notable strengths, notable weaknesses, and any "
    'flagged moments>"}. Base the summary only on the data provided.'
)

QUERY_INSTRUCTION = (
    'Return a JSON object only: {"answer": "<answer grounded in the listed entries>", '
    '"citations": [{"metric_id": "<id>", "scope": "session"|"turn:<i>"}]}. Cite only '
    "entries from the list. If the question cannot be answered from the listed "
    'entries, return {"answer": "", "citations": []}.'
)


def format_dialogue(transcript: Transcript) -> str:
    return "\n".join(f"[turn {t.index}] {t.role}: {t.text}" for t in transcript.turns)


def rating_prompt(
    metric_id: str,
    name: str,
    definition: str,
    anchors: dict[int, str],
    scale_min: int,
    scale_max: int,
    transcript: Transcript,
    scope_line: str,
) -> str:
    anchor_block = "\n".join(f"{level} = {anchors[level]}" for level in sorted(anchors))
    return (
        f"Rubric: {name} ({metric_id})\n"
        f"Definition: {definition}\n"
        f"Scale: integers {scale_min} (lowest) to {scale_max} (highest).\n"
        f"Anchors:\n{anchor_block}\n\n"
        f"Dialogue:\n{format_dialogue(transcript)}\n\n"
        f"{scope_line}\n\n"
        f"{RATING_INSTRUCTION}"
    )


def repair_suffix(rule: str) -> str:
    return (
        f"\n\nYour previous reply violated the output schema: {rule}. "
        "Reply again with a single valid JSON object only."
    )


def draft_prompt(description: str, constraints: list[str], categories: tuple[str, ...]) -> str:
    constraint_block = (
        "\n".join(f"- {c}" for c in constraints) if constraints else "(none)"
    )
    return (
        "Draft an evaluation rubric for mental-health support dialogues.\n"
        f"Construct description: {description}\n"
        f"Constraints:\n{constraint_block}\n"
        f"Pick the closest category from: {', '.join(categories)}\n\n"
        f"{DRAFT_INSTRUCTION}"
    )


def revise_prompt(current_draft: dict, feedback: str) -> str:
    return (
        "Revise this evaluation rubric according to the feedback. Keep the id.\n"
        f"Current rubric:\n{json.dumps(current_draft, ensure_ascii=False, indent=2)}\n"
        f"Feedback: {feedback}\n\n"
        f"{DRAFT_INSTRUCTION}"
    )


def examples_prompt(draft: dict, n: int) -> str:
    return (
        f"Write {n} short synthetic dialogue snippets that demonstrate how this rubric "
        "applies in practice, each with the score it should receive.\n"
        f"Rubric:\n{json.dumps(draft, ensure_ascii=False, indent=2)}\n\n"
        f"{EXAMPLES_INSTRUCTION}"
    )


def claims_prompt(turn_text: str, domain: str) -> str:
    return (
        f"Decompose this supporter message into atomic factual claims that could be "
        f"checked against {domain} reference sources.\n"
        f"Message: {turn_text}\n\n"
        f"{CLAIMS_INSTRUCTION}"
    )


def verdict_prompt(claim: str, evidence_notes: list[str]) -> str:
    notes = "\n".join(f"- {note}" for note in evidence_notes)
    return (
        f"Claim: {claim}\n"
        f"Evidence:\n{notes}\n\n"
        f"{VERDICT_INSTRUCTION}"
    )


def summary_prompt(payload: dict) -> str:
    return (
        "Summarize this dialogue evaluation. The data below contains per-metric "
        "session aggregates, flagged turns, and flagged excerpts; no other "
        "transcript content is available.\n"
        f"{json.dumps(payload, ensure_ascii=False, indent=2)}\n\n"
        f"{SUMMARY_INSTRUCTION}"
    )


def query_prompt(question: str, entries: list[dict]) -> str:
    entry_block = "\n".join(
        f"- {e['metric_id']} [{e['scope']}] {e['detail']}" for e in entries
    )
    return (
        "Answer the question using only the evaluation entries listed below. "
        "Do not speculate beyond them.\n"
        f"Question: {question}\n"
        f"Entries:\n{entry_block}\n\n"
        f"{QUERY_INSTRUCTION}"
    )
