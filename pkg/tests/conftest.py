from __future__ import annotations

import json
from pathlib import Path

import pytest

from dialogue_audit.judge import MockJudgeClient
from dialogue_audit.predictors import MockPredictorClient
from dialogue_audit.registry import Registry, load_library
from dialogue_audit.transcript import Transcript, parse_transcript

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE_PREFIX = "tests/test_acceptance.py::"


def pytest_runtest_logreport(report):
    """Print one pass/fail line per acceptance criterion."""

    if report.when != "call" or not report.nodeid.startswith(_ACCEPTANCE_PREFIX):
        return
    name = report.nodeid.split("::", 1)[1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[acceptance] {name}: {status}")


# Seeker/supporter exchange used across tests; 30 turns, alternating roles,
# with enough declarative supporter content to exercise the claim pipeline.
_SEEKER_LINES = [
    "I have been feeling anxious almost every day this month.",
    "Work mostly. My manager keeps adding deadlines and I cannot say no.",
    "I tried that once but I froze up completely.",
    "Maybe. I just feel like everything is my fault somehow.",
    "When I think about Monday my chest gets tight.",
    "I have not slept properly in two weeks.",
    "Sometimes I wonder if anything will actually change.",
    "My sister says I should just quit, but I need the income.",
    "That makes sense, I guess I never looked at it that way.",
    "I did manage to take a walk yesterday like we discussed.",
    "It helped a little, honestly.",
    "I am scared of disappointing people, that is the core of it.",
    "Okay. I can try writing that down this week.",
    "Thank you, this has helped me see things differently.",
    "I will let you know how the conversation with my manager goes.",
]
_SUPPORTER_LINES = [
    "That sounds exhausting. Anxiety that shows up daily wears a person down.",
    "It sounds like the pressure keeps piling on without any relief valve.",
    "Freezing up in a stressful confrontation is a very common stress response.",
    "I hear a lot of self-blame in that. What would you say to a friend in your spot?",
    "Chest tightness is a typical physical sign of anticipatory anxiety.",
    "Sleep loss makes anxiety noticeably worse. Adults generally need seven to nine hours of sleep.",
    "Change often starts smaller than we expect. You already named the pattern clearly.",
    "You are weighing real constraints. Wanting stability is not a failure.",
    "You connected the dots there yourself, which matters.",
    "You followed through even while feeling low. That took real effort.",
    "Small relief counts. Regular exercise is known to reduce anxiety symptoms over time.",
    "Naming that fear out loud is a significant step toward loosening its grip.",
    "Writing thoughts down can help create distance from them.",
    "You did the hard part by showing up and being honest here.",
    "I would like to hear how it goes. You have a concrete plan now.",
]


def build_fixture_transcript(turn_count: int = 30) -> Transcript:
    lines = []
    for i in range(turn_count):
        if i % 2 == 0:
            lines.append(f"Seeker: {_SEEKER_LINES[(i // 2) % len(_SEEKER_LINES)]}")
        else:
            lines.append(f"Supporter: {_SUPPORTER_LINES[(i // 2) % len(_SUPPORTER_LINES)]}")
    return parse_transcript("\n".join(lines), "plain_text")


@pytest.fixture(scope="session")
def registry() -> Registry:
    return load_library()


@pytest.fixture()
def fixture_transcript() -> Transcript:
    return build_fixture_transcript(30)


@pytest.fixture()
def short_transcript() -> Transcript:
    return parse_transcript(
        "Seeker: I feel anxious.\nSupporter: Tell me more.", "plain_text"
    )


@pytest.fixture()
def mock_judge() -> MockJudgeClient:
    return MockJudgeClient()


@pytest.fixture()
def mock_predictors() -> MockPredictorClient:
    return MockPredictorClient()


class ScriptedJudgeClient:
    """Judge stub that replays a fixed sequence of raw replies."""

    def __init__(self, replies, config=None):
        from dialogue_audit.judge import MOCK_JUDGE_CONFIG

        self.replies = list(replies)
        self.config = config or MOCK_JUDGE_CONFIG
        self.calls = 0

    def complete(self, system: str, user: str) -> str:
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


@pytest.fixture()
def scripted_judge_factory():
    return ScriptedJudgeClient


def write_chat_json(path: Path, transcript_id: str, turns: list[tuple[str, str]]) -> None:
    doc = {
        "id": transcript_id,
        "source": "chat_json",
        "turns": [
            {"index": i, "role": role, "text": text, "timestamp": None}
            for i, (role, text) in enumerate(turns)
        ],
    }
    path.write_text(json.dumps(doc))
