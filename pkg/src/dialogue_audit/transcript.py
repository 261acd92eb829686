"""Transcript ingestion, serialization, and evidence-span addressing.

Three input formats are supported:

* ``plain_text``   — one ``Role: text`` line per turn,
* ``chat_json``    — the engine's canonical JSON schema,
* ``chat_export``  — ``{"messages": [{"role", "content"}]}`` dumps from
  assistant-style chat tools.

All formats normalize onto a two-role schema (seeker/supporter). Offsets in
evidence spans count unicode code points, never bytes.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from .errors import (
    EmptyTranscript,
    MalformedInput,
    QuoteNotFound,
    SpanOutOfRange,
    UnknownRole,
)

SEEKER = "seeker"
SUPPORTER = "supporter"
ROLES = (SEEKER, SUPPORTER)

SOURCES = ("plain_text", "chat_json", "chat_export")

# Fixed label table; every metric in the engine is phrased against these two roles.
ROLE_LABELS = {
    "seeker": SEEKER,
    "user": SEEKER,
    "client": SEEKER,
    "supporter": SUPPORTER,
    "assistant": SUPPORTER,
    "therapist": SUPPORTER,
}

_PLAIN_LINE = re.compile(r"^(Seeker|Supporter|User|Assistant|Client|Therapist):\s*(.*)$")


@dataclass(frozen=True)
class Turn:
    """One utterance by one role. Immutable once constructed."""

    index: int
    role: str
    text: str
    timestamp: str | None = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"turn index must be non-negative, got {self.index}")
        if self.role not in ROLES:
            raise UnknownRole(self.role)
        if not self.text.strip():
            raise ValueError("turn text must be non-empty after trimming")


@dataclass(frozen=True)
class Transcript:
    """An ordered, contiguously indexed dialogue under audit."""

    id: str
    source: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("transcript id must be non-empty")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.turns:
            raise EmptyTranscript("transcript has no turns")
        for position, turn in enumerate(self.turns):
            if turn.index != position:
                raise ValueError(
                    f"turn indices must be contiguous from 0; turn at position "
                    f"{position} has index {turn.index}"
                )

    def turn(self, index: int) -> Turn:
        if index < 0 or index >= len(self.turns):
            raise SpanOutOfRange(f"turn index {index} out of range (0..{len(self.turns) - 1})")
        return self.turns[index]

    def turns_for_role(self, role: str) -> list[Turn]:
        return [t for t in self.turns if t.role == role]


@dataclass(frozen=True)
class EvidenceSpan:
    """Half-open character range inside one turn's text (code-point offsets)."""

    turn_index: int
    char_start: int
    char_end: int

    def __post_init__(self) -> None:
        if self.turn_index < 0 or self.char_start < 0:
            raise ValueError("span indices must be non-negative")
        if self.char_end <= self.char_start:
            raise ValueError("char_end must be greater than char_start")


@dataclass
class ParseStats:
    """Bookkeeping from a parse; dropped lines are counted, never silently lost."""

    dropped_lines: int = 0
    dropped_details: list[str] = field(default_factory=list)


def _content_id(turns: list[tuple[str, str]]) -> str:
    blob = json.dumps(turns, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return "t-" + hashlib.sha256(blob).hexdigest()[:12]


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"input is not valid UTF-8: {exc}") from None


def _parse_plain_text(text: str, stats: ParseStats) -> list[Turn]:
    turns: list[Turn] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        match = _PLAIN_LINE.match(line)
        if match is None:
            raise MalformedInput(
                f"expected 'Role: text' with role in Seeker/Supporter/User/"
                f"Assistant/Client/Therapist, got {line.strip()[:60]!r}",
                line=lineno,
            )
        label, body = match.group(1), match.group(2).strip()
        if not body:
            stats.dropped_lines += 1
            stats.dropped_details.append(f"line {lineno}: empty text after role label")
            continue
        role = ROLE_LABELS[label.lower()]
        turns.append(Turn(index=len(turns), role=role, text=body))
    return turns


def _parse_chat_json(text: str, stats: ParseStats) -> tuple[str, list[Turn]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("turns"), list):
        raise MalformedInput("chat_json document must be an object with a 'turns' list")
    transcript_id = doc.get("id")
    if not isinstance(transcript_id, str) or not transcript_id:
        raise MalformedInput("chat_json document must carry a non-empty string 'id'")

    turns: list[Turn] = []
    for position, entry in enumerate(doc["turns"]):
        if not isinstance(entry, dict):
            raise MalformedInput(f"turn {position} is not an object")
        declared = entry.get("index")
        if declared != position:
            raise MalformedInput(
                f"turn at position {position} declares index {declared!r}; "
                f"indices must be contiguous from 0"
            )
        role = entry.get("role")
        if not isinstance(role, str) or role not in ROLES:
            raise UnknownRole(str(role))
        text_value = entry.get("text")
        if not isinstance(text_value, str):
            raise MalformedInput(f"turn {position} 'text' must be a string")
        timestamp = entry.get("timestamp")
        if timestamp is not None and not isinstance(timestamp, str):
            raise MalformedInput(f"turn {position} 'timestamp' must be a string or null")
        body = text_value.strip()
        if not body:
            stats.dropped_lines += 1
            stats.dropped_details.append(f"turn {position}: empty text")
            continue
        turns.append(Turn(index=len(turns), role=role, text=body, timestamp=timestamp))
    return transcript_id, turns


def _parse_chat_export(text: str, stats: ParseStats) -> list[Turn]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("messages"), list):
        raise MalformedInput("chat_export document must be an object with a 'messages' list")

    turns: list[Turn] = []
    for position, message in enumerate(doc["messages"]):
        if not isinstance(message, dict):
            raise MalformedInput(f"message {position} is not an object")
        role_label = message.get("role")
        if role_label not in ("user", "assistant"):
            raise UnknownRole(str(role_label))
        content = message.get("content")
        if not isinstance(content, str):
            raise MalformedInput(f"message {position} 'content' must be a string")
        body = content.strip()
        if not body:
            stats.dropped_lines += 1
            stats.dropped_details.append(f"message {position}: empty content")
            continue
        role = SEEKER if role_label == "user" else SUPPORTER
        turns.append(Turn(index=len(turns), role=role, text=body))
    return turns


def parse_with_stats(raw: bytes | str, source: str) -> tuple[Transcript, ParseStats]:
    """Parse ``raw`` in the named format, returning the transcript and drop counters."""

    if source not in SOURCES:
        raise MalformedInput(f"unknown transcript format {source!r}")
    text = _decode(raw)
    stats = ParseStats()

    if source == "plain_text":
        turns = _parse_plain_text(text, stats)
        transcript_id = _content_id([(t.role, t.text) for t in turns])
    elif source == "chat_json":
        transcript_id, turns = _parse_chat_json(text, stats)
    else:
        turns = _parse_chat_export(text, stats)
        transcript_id = _content_id([(t.role, t.text) for t in turns])

    if not turns:
        raise EmptyTranscript(f"no usable turns in {source} input")
    return Transcript(id=transcript_id, source=source, turns=tuple(turns)), stats


def parse_transcript(raw: bytes | str, source: str) -> Transcript:
    """Parse ``raw`` in the named format; see :func:`parse_with_stats` for drop counts."""

    transcript, _ = parse_with_stats(raw, source)
    return transcript


_PLAIN_LABELS = {SEEKER: "Seeker", SUPPORTER: "Supporter"}
_EXPORT_LABELS = {SEEKER: "user", SUPPORTER: "assistant"}


def serialize_transcript(transcript: Transcript, source: str | None = None) -> str:
    """Render the transcript in one of the three input formats.

    Defaults to the transcript's own source so parse -> serialize -> parse is
    an identity for every format.
    """

    fmt = source or transcript.source
    if fmt == "plain_text":
        return "\n".join(f"{_PLAIN_LABELS[t.role]}: {t.text}" for t in transcript.turns) + "\n"
    if fmt == "chat_json":
        doc = {
            "id": transcript.id,
            "source": transcript.source,
            "turns": [
                {"index": t.index, "role": t.role, "text": t.text, "timestamp": t.timestamp}
                for t in transcript.turns
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"
    if fmt == "chat_export":
        doc = {
            "messages": [
                {"role": _EXPORT_LABELS[t.role], "content": t.text} for t in transcript.turns
            ]
        }
        return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"
    raise MalformedInput(f"unknown transcript format {fmt!r}")


def transcript_to_dict(transcript: Transcript) -> dict:
    return json.loads(serialize_transcript(transcript, "chat_json"))


def transcript_from_dict(doc: dict) -> Transcript:
    return parse_transcript(json.dumps(doc), "chat_json")


def resolve_span(transcript: Transcript, span: EvidenceSpan) -> str:
    """Return the exact excerpt a span addresses; never truncates silently."""

    if span.turn_index >= len(transcript.turns):
        raise SpanOutOfRange(
            f"turn index {span.turn_index} out of range (transcript has "
            f"{len(transcript.turns)} turns)"
        )
    text = transcript.turns[span.turn_index].text
    if span.char_end > len(text):
        raise SpanOutOfRange(
            f"span end {span.char_end} exceeds turn {span.turn_index} length {len(text)}"
        )
    return text[span.char_start : span.char_end]


def _normalize_ws(value: str) -> str:
    return " ".join(value.split())


def _normalized_with_map(text: str) -> tuple[str, list[int]]:
    """Whitespace-collapsed copy of ``text`` plus a map back to original offsets."""

    out: list[str] = []
    offsets: list[int] = []
    in_space = True  # leading whitespace is dropped
    for i, ch in enumerate(text):
        if ch.isspace():
            if not in_space:
                out.append(" ")
                offsets.append(i)
                in_space = True
        else:
            out.append(ch)
            offsets.append(i)
            in_space = False
    if out and out[-1] == " ":
        out.pop()
        offsets.pop()
    return "".join(out), offsets


def locate_quote(transcript: Transcript, turn_index: int, quote: str) -> EvidenceSpan:
    """Find ``quote`` inside a turn and return its span.

    Matching relaxes in three stages: exact, case-insensitive, then
    whitespace-normalized. The returned offsets always address the original
    turn text.
    """

    if not quote:
        raise ValueError("quote must be non-empty")
    if turn_index < 0 or turn_index >= len(transcript.turns):
        raise SpanOutOfRange(
            f"turn index {turn_index} out of range (transcript has "
            f"{len(transcript.turns)} turns)"
        )
    text = transcript.turns[turn_index].text

    start = text.find(quote)
    if start >= 0:
        return EvidenceSpan(turn_index, start, start + len(quote))

    # Case-insensitive pass over the original string keeps offsets exact even
    # when lowercasing would change lengths.
    match = re.search(re.escape(quote), text, flags=re.IGNORECASE)
    if match is not None:
        return EvidenceSpan(turn_index, match.start(), match.end())

    norm_text, offset_map = _normalized_with_map(text)
    norm_quote = _normalize_ws(quote)
    if norm_quote:
        # IGNORECASE regex keeps offsets exact; lowercasing could shift them.
        match = re.search(re.escape(norm_quote), norm_text, flags=re.IGNORECASE)
        if match is not None:
            start = offset_map[match.start()]
            end = offset_map[match.end() - 1] + 1
            return EvidenceSpan(turn_index, start, end)

    closest = _closest_fragment(norm_text, norm_quote)
    raise QuoteNotFound(
        f"quote {quote[:60]!r} not found in turn {turn_index}"
        + (f"; closest match: {closest!r}" if closest else ""),
        closest=closest,
    )


def _closest_fragment(text: str, quote: str) -> str:
    """Longest shared fragment between quote and turn text, for diagnostics."""

    import difflib

    if not text or not quote:
        return ""
    matcher = difflib.SequenceMatcher(None, text.lower(), quote.lower(), autojunk=False)
    block = matcher.find_longest_match(0, len(text), 0, len(quote))
    if block.size == 0:
        return ""
    return text[block.a : block.a + block.size]
