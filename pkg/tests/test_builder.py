from __future__ import annotations

import json

import pytest

from dialogue_audit.builder import (
    SessionStore,
    draft_rubric,
    finalize,
    generate_calibration_examples,
    revise_rubric,
)
from dialogue_audit.errors import (
    DraftInvalid,
    DuplicateMetricId,
    ExampleInvalid,
    SessionFinalized,
)
from dialogue_audit import prompts
from dialogue_audit.judge import MockJudgeClient
from dialogue_audit.registry import load_library, validate_rubric

BAD_DRAFT = json.dumps(
    {
        "id": "bad-anchors",
        "name": "Bad Anchors",
        "category": "Core Conditions",
        "definition": "has anchors at the wrong levels",
        "scale": {"min": 1, "max": 5},
        "anchors": [
            {"level": 1, "label": "low", "description": "a"},
            {"level": 2, "label": "medium", "description": "b"},
            {"level": 5, "label": "high", "description": "c"},
        ],
        "references": [],
    }
)


class TestDraft:
    def test_mock_draft_validates(self, mock_judge):
        session = draft_rubric(mock_judge, "penalizes unsolicited advice")
        assert session.state == "drafting"
        assert len(session.current_draft.anchors) == 3
        assert validate_rubric(session.current_draft) == []
        assert session.current_draft.origin == "custom"
        assert session.current_draft.version == 1

    def test_empty_description_rejected(self, mock_judge):
        with pytest.raises(ValueError):
            draft_rubric(mock_judge, "   ")

    def test_invalid_draft_twice_surfaces_after_one_repair(self, scripted_judge_factory):
        client = scripted_judge_factory([BAD_DRAFT, BAD_DRAFT])
        with pytest.raises(DraftInvalid) as exc:
            draft_rubric(client, "some construct")
        assert client.calls == 2  # initial + one repair round
        assert any("anchors-must-cover-1-3-5" in v for v in exc.value.violations)

    def test_invalid_then_repaired(self, scripted_judge_factory, mock_judge):
        good = mock_judge.complete("", prompts.draft_prompt("x construct", [], ()))
        client = scripted_judge_factory([BAD_DRAFT, good])
        session = draft_rubric(client, "x construct")
        assert session.state == "drafting"
        assert client.calls == 2

    def test_persisted_after_draft(self, mock_judge, tmp_path):
        store = SessionStore(tmp_path)
        session = draft_rubric(mock_judge, "tracks hope instillation", store=store)
        assert store.exists(session.session_id)
        loaded = store.load(session.session_id)
        assert loaded.current_draft == session.current_draft


class TestRevise:
    def test_version_and_history(self, mock_judge):
        session = draft_rubric(mock_judge, "avoids moralizing language")
        revise_rubric(session, "make level 5 require explicit permission-asking", mock_judge)
        assert session.current_draft.version == 2
        assert len(session.history) == 1
        assert session.history[0][0].startswith("make level 5")

    def test_three_revisions_versions_monotone(self, mock_judge):
        session = draft_rubric(mock_judge, "notices cognitive distortions")
        for i, feedback in enumerate(["tighten level 1", "mention evidence", "add boundaries"]):
            revise_rubric(session, feedback, mock_judge)
        assert [v for _, v in session.history] == [2, 3, 4]
        assert session.current_draft.version == 4

    def test_revise_finalized_rejected(self, mock_judge, tmp_path):
        registry = load_library(custom_store=tmp_path / "custom.json")
        session = draft_rubric(mock_judge, "supports bedtime routines")
        finalize(session, registry)
        with pytest.raises(SessionFinalized):
            revise_rubric(session, "more anchors", mock_judge)

    def test_draft_always_validates_after_revision(self, mock_judge):
        session = draft_rubric(mock_judge, "handles anger safely")
        revise_rubric(session, "consider sarcasm too", mock_judge)
        assert validate_rubric(session.current_draft) == []

    def test_replay_reproduces_draft(self, mock_judge):
        feedbacks = ["weight recency", "punish absolutes"]
        a = draft_rubric(MockJudgeClient(), "rewards gentle pacing")
        for feedback in feedbacks:
            revise_rubric(a, feedback, MockJudgeClient())

        b = draft_rubric(MockJudgeClient(), "rewards gentle pacing")
        for feedback in feedbacks:
            revise_rubric(b, feedback, MockJudgeClient())
        assert a.current_draft == b.current_draft


class TestCalibrationExamples:
    def test_three_examples_span_scores(self, mock_judge):
        session = draft_rubric(mock_judge, "notices avoidance patterns")
        examples = generate_calibration_examples(session, 3, mock_judge)
        assert len(examples) == 3
        scores = {e.expected_score for e in examples}
        assert len(scores) >= 2

    def test_two_examples_cover_halves(self, mock_judge):
        session = draft_rubric(mock_judge, "checks for consent before advice")
        examples = generate_calibration_examples(session, 2, mock_judge)
        scores = [e.expected_score for e in examples]
        assert any(s <= 3 for s in scores) and any(s >= 3 for s in scores)

    def test_snippets_parse_as_transcripts(self, mock_judge):
        session = draft_rubric(mock_judge, "responds to grief gently")
        for example in generate_calibration_examples(session, 4, mock_judge):
            assert 2 <= len(example.dialogue_snippet.turns) <= 6
            assert 1 <= example.expected_score <= 5

    def test_n_zero_rejected(self, mock_judge):
        session = draft_rubric(mock_judge, "any construct")
        with pytest.raises(ValueError):
            generate_calibration_examples(session, 0, mock_judge)

    def test_n_eleven_rejected(self, mock_judge):
        session = draft_rubric(mock_judge, "any construct")
        with pytest.raises(ValueError):
            generate_calibration_examples(session, 11, mock_judge)

    def test_unusable_examples_raise_after_one_repair(self, mock_judge, scripted_judge_factory):
        session = draft_rubric(mock_judge, "any other construct")
        bad = json.dumps({"examples": [{"turns": [], "expected_score": 3, "rationale": ""}]})
        client = scripted_judge_factory([bad, bad, bad])
        with pytest.raises(ExampleInvalid):
            generate_calibration_examples(session, 1, client)
        assert client.calls == 2  # initial + one repair round

    def test_shape_failures_surface_as_judge_failure(self, mock_judge, scripted_judge_factory):
        from dialogue_audit.errors import JudgeFailure

        session = draft_rubric(mock_judge, "yet another construct")
        client = scripted_judge_factory(["not json at all"] * 5)
        with pytest.raises(JudgeFailure):
            generate_calibration_examples(session, 1, client)


class TestFinalize:
    def test_appears_in_custom_listing(self, mock_judge, tmp_path):
        registry = load_library(custom_store=tmp_path / "custom.json")
        session = draft_rubric(mock_judge, "rewards validation before advice")
        metric_id = finalize(session, registry)
        listed = registry.list_metrics(origin="custom")
        assert [s.id for s in listed] == [metric_id]
        assert session.state == "finalized"

    def test_double_finalize(self, mock_judge, tmp_path):
        registry = load_library(custom_store=tmp_path / "custom.json")
        session = draft_rubric(mock_judge, "names somatic cues")
        finalize(session, registry)
        with pytest.raises(SessionFinalized):
            finalize(session, registry)

    def test_collision_with_shipped_id(self, mock_judge, tmp_path):
        from dataclasses import replace

        registry = load_library(custom_store=tmp_path / "custom.json")
        session = draft_rubric(mock_judge, "empathy in disguise")
        session.current_draft = replace(session.current_draft, id="empathy")
        with pytest.raises(DuplicateMetricId):
            finalize(session, registry)
        assert session.state == "drafting"


class TestSessionStore:
    def test_round_trip_with_examples(self, mock_judge, tmp_path):
        store = SessionStore(tmp_path)
        session = draft_rubric(mock_judge, "summarizes at transitions", store=store)
        generate_calibration_examples(session, 2, mock_judge, store=store)
        revise_rubric(session, "require an accuracy check", mock_judge, store=store)
        loaded = store.load(session.session_id)
        assert loaded.to_dict() == session.to_dict()

    def test_list_and_delete(self, mock_judge, tmp_path):
        store = SessionStore(tmp_path)
        session = draft_rubric(mock_judge, "something", store=store)
        assert store.list_ids() == [session.session_id]
        store.delete(session.session_id)
        assert store.list_ids() == []
