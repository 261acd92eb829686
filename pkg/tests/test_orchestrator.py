from __future__ import annotations

import json
from collections import Counter

import pytest

from dialogue_audit.cache import ContentCache
from dialogue_audit.config import parse_config_text
from dialogue_audit.errors import (
    AllMetricsFailed,
    ConfigInvalid,
    InvalidRequest,
    NoTranscriptsFound,
)
from dialogue_audit.judge import MOCK_JUDGE_CONFIG, MockJudgeClient, Rating
from dialogue_audit.orchestrator import (
    EvaluationRequest,
    run_batch,
    run_evaluation,
    sniff_format,
)
from dialogue_audit.predictors import MockPredictorClient, PredictorEndpoint
from dialogue_audit.transcript import serialize_transcript

RUBRIC_IDS = ["reflective-listening", "empathy"]
MODEL_IDS = ["reflection", "toxicity-a", "emotion-classification", "emotion-triggers"]


def make_request(transcript, metric_ids, **overrides) -> EvaluationRequest:
    kwargs = dict(
        transcript=transcript,
        metric_ids=metric_ids,
        judge=MOCK_JUDGE_CONFIG,
        use_mock=True,
    )
    kwargs.update(overrides)
    return EvaluationRequest(**kwargs)


def result_multiset(report):
    """(metric, scope, serialized entry) multiset for determinism checks."""

    items = []
    for result in report.results:
        for index, entry in result.turn_entries.items():
            from dialogue_audit.report import entry_to_dict

            items.append((result.metric_id, f"turn:{index}", json.dumps(entry_to_dict(entry), sort_keys=True)))
        if result.session_entry is not None:
            from dialogue_audit.report import entry_to_dict

            items.append((result.metric_id, "session", json.dumps(entry_to_dict(result.session_entry), sort_keys=True)))
    return Counter(items)


class TestRunEvaluation:
    def test_mixed_metrics_all_mock(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["reflective-listening", "reflection", "toxicity-a"])
        report = run_evaluation(req, registry)
        assert len(report.results) == 3
        assert report.errors == ()
        by_id = {r.metric_id: r for r in report.results}
        # rubric: one rating per supporter turn + session entry
        rubric = by_id["reflective-listening"]
        assert len(rubric.turn_entries) == 15
        assert isinstance(rubric.session_entry, Rating)
        # reflection: supporter turns only
        assert set(by_id["reflection"].turn_entries) == {i for i in range(30) if i % 2 == 1}
        # toxicity: both roles
        assert len(by_id["toxicity-a"].turn_entries) == 30

    def test_rubric_ratings_valid(self, fixture_transcript, registry):
        from dialogue_audit.transcript import EvidenceSpan, resolve_span

        req = make_request(fixture_transcript, ["empathy"])
        report = run_evaluation(req, registry)
        result = report.results[0]
        for entry in result.turn_entries.values():
            assert isinstance(entry.score, int) and 1 <= entry.score <= 5
            assert entry.justification
            for ref in entry.evidence:
                assert ref.resolved
                resolve_span(fixture_transcript, EvidenceSpan(ref.turn_index, ref.char_start, ref.char_end))

    def test_partial_failure_dead_endpoint(self, fixture_transcript, registry):
        req = make_request(
            fixture_transcript,
            ["reflective-listening", "empathy", "reflection"],
            use_mock=False,
            predictor_endpoints={
                "reflection": PredictorEndpoint("reflection", "http://127.0.0.1:9", timeout_ms=300)
            },
        )
        report = run_evaluation(req, registry, judge_client=MockJudgeClient())
        assert len(report.results) == 2
        assert len(report.errors) == 1
        error = report.errors[0]
        assert error.metric_id == "reflection"
        assert error.stage == "predictor"

    def test_empty_metric_ids(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, [])
        with pytest.raises(InvalidRequest):
            run_evaluation(req, registry)

    def test_unknown_metric_id(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["no-such-thing"])
        with pytest.raises(InvalidRequest):
            run_evaluation(req, registry)

    def test_missing_endpoint_without_mock(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["reflection"], use_mock=False)
        with pytest.raises(InvalidRequest):
            run_evaluation(req, registry)

    def test_all_metrics_failed(self, fixture_transcript, registry):
        req = make_request(
            fixture_transcript,
            ["reflection"],
            use_mock=False,
            predictor_endpoints={
                "reflection": PredictorEndpoint("reflection", "http://127.0.0.1:9", timeout_ms=300)
            },
        )
        with pytest.raises(AllMetricsFailed):
            run_evaluation(req, registry, judge_client=MockJudgeClient())

    def test_session_only_scope(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["empathy"], scopes="session_only")
        report = run_evaluation(req, registry)
        result = report.results[0]
        assert result.turn_entries == {}
        assert isinstance(result.session_entry, Rating)

    def test_emotion_triggers_session_entry(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["emotion-triggers"])
        report = run_evaluation(req, registry)
        result = report.results[0]
        assert result.turn_entries == {}
        assert result.session_entry is not None
        assert len(result.session_entry.relations) == 15

    def test_factuality_under_mock_null_retriever(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["fact-general"])
        report = run_evaluation(req, registry)
        result = report.results[0]
        assert set(result.turn_entries) == {i for i in range(30) if i % 2 == 1}
        for entry in result.turn_entries.values():
            assert all(c.verdict == "abstain" for c in entry.claims)
            assert entry.score is None

    def test_summary_strengths_weaknesses_rubric_only(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, RUBRIC_IDS + ["toxicity-a"])
        report = run_evaluation(req, registry)
        for metric_id in report.summary.strengths + report.summary.weaknesses:
            result = report.result_for(metric_id)
            assert result.family == "rubric_based"

    def test_results_keep_request_order(self, fixture_transcript, registry):
        req = make_request(fixture_transcript, ["toxicity-a", "empathy", "reflection"])
        report = run_evaluation(req, registry)
        assert [r.metric_id for r in report.results] == ["toxicity-a", "empathy", "reflection"]


class TestConcurrency:
    def test_multiset_identical_across_concurrency(self, fixture_transcript, registry):
        ids = RUBRIC_IDS + MODEL_IDS
        report_1 = run_evaluation(make_request(fixture_transcript, ids, max_concurrency=1), registry)
        report_8 = run_evaluation(make_request(fixture_transcript, ids, max_concurrency=8), registry)
        assert result_multiset(report_1) == result_multiset(report_8)

    def test_high_water_mark_respects_bound(self, fixture_transcript, registry, monkeypatch):
        from dialogue_audit import orchestrator as orch

        captured = {}
        original = orch.ConcurrencyMeter

        class CapturingMeter(original):
            def __init__(self):
                super().__init__()
                captured["meter"] = self

        monkeypatch.setattr(orch, "ConcurrencyMeter", CapturingMeter)
        req = make_request(fixture_transcript, RUBRIC_IDS, max_concurrency=3)
        run_evaluation(req, registry)
        assert captured["meter"].high_water <= 3

    def test_progress_monotone(self, fixture_transcript, registry):
        seen = []
        req = make_request(fixture_transcript, ["empathy"])
        run_evaluation(req, registry, progress_callback=lambda done, total: seen.append((done, total)))
        dones = [d for d, _ in seen]
        assert dones == sorted(dones)
        assert seen[-1][0] == seen[-1][1]


class TestCacheBehavior:
    def test_warm_cache_zero_backend_calls(self, fixture_transcript, registry, tmp_path):
        cache = ContentCache(tmp_path / "cache")
        ids = ["reflective-listening", "empathy", "reflection", "toxicity-a", "emotion-triggers", "fact-general"]
        req = make_request(fixture_transcript, ids)

        judge_1, predictors_1 = MockJudgeClient(), MockPredictorClient()
        report_1 = run_evaluation(req, registry, cache=cache, judge_client=judge_1, predictor_client=predictors_1)
        assert judge_1.calls > 0 and predictors_1.calls > 0

        judge_2, predictors_2 = MockJudgeClient(), MockPredictorClient()
        report_2 = run_evaluation(req, registry, cache=cache, judge_client=judge_2, predictor_client=predictors_2)
        assert judge_2.calls == 0
        assert predictors_2.calls == 0

        doc_1, doc_2 = report_1.to_dict(), report_2.to_dict()
        for volatile in ("report_id", "created_at"):
            doc_1.pop(volatile), doc_2.pop(volatile)
        assert doc_1 == doc_2


class TestBatch:
    def _write_transcripts(self, directory, count_valid=3, malformed=0):
        directory.mkdir(parents=True, exist_ok=True)
        from tests.conftest import build_fixture_transcript

        for i in range(count_valid):
            t = build_fixture_transcript(6)
            (directory / f"dialogue_{i}.txt").write_text(serialize_transcript(t, "plain_text"))
        for i in range(malformed):
            (directory / f"broken_{i}.txt").write_text("this line has no role prefix\n")

    def test_all_valid(self, registry, tmp_path, fixture_transcript):
        src, out = tmp_path / "in", tmp_path / "out"
        self._write_transcripts(src, count_valid=3)
        template = make_request(fixture_transcript, ["empathy"])
        summary = run_batch(src, template, out, registry)
        assert summary.total == 3 and summary.failed == 0
        assert summary.all_ok
        assert len(list(out.glob("*.report.json"))) == 1  # identical content -> same id

    def test_distinct_files_distinct_reports(self, registry, tmp_path, fixture_transcript):
        src, out = tmp_path / "in", tmp_path / "out"
        src.mkdir()
        for i in range(3):
            (src / f"d{i}.txt").write_text(
                f"Seeker: I am worried about topic {i}.\nSupporter: Tell me more about that worry."
            )
        template = make_request(fixture_transcript, ["empathy"])
        summary = run_batch(src, template, out, registry)
        assert summary.succeeded == 3
        assert len(list(out.glob("*.report.json"))) == 3

    def test_malformed_listed_not_fatal(self, registry, tmp_path, fixture_transcript):
        src, out = tmp_path / "in", tmp_path / "out"
        self._write_transcripts(src, count_valid=2, malformed=1)
        template = make_request(fixture_transcript, ["empathy"])
        summary = run_batch(src, template, out, registry)
        assert summary.total == 3
        assert summary.failed == 1
        assert not summary.all_ok
        bad = [f for f in summary.files if f.status == "parse_error"]
        assert len(bad) == 1 and bad[0].file.startswith("broken_")

    def test_empty_dir(self, registry, tmp_path, fixture_transcript):
        empty = tmp_path / "empty"
        empty.mkdir()
        template = make_request(fixture_transcript, ["empathy"])
        with pytest.raises(NoTranscriptsFound):
            run_batch(empty, template, tmp_path / "out", registry)

    def test_sniff_format(self, tmp_path):
        txt = tmp_path / "a.txt"
        txt.write_text("Seeker: hi")
        assert sniff_format(txt) == "plain_text"
        export = tmp_path / "b.json"
        export.write_text(json.dumps({"messages": []}))
        assert sniff_format(export) == "chat_export"
        canonical = tmp_path / "c.json"
        canonical.write_text(json.dumps({"id": "x", "turns": []}))
        assert sniff_format(canonical) == "chat_json"


class TestConfigParsing:
    def test_full_config(self):
        settings = parse_config_text(
            """
            # engine config
            judge.endpoint_url = http://localhost:8080/v1/chat/completions
            judge.model_name = llama3
            judge.temperature = 0
            judge.max_retries = 3
            predictors.mock = true
            predictors.reflection.base_url = http://localhost:9090
            predictors.reflection.timeout_ms = 1500
            cache.dir = /tmp/audit-cache
            max_concurrency = 6
            scopes = session_only
            flags.low_rubric_score_max = 3
            flags.high_toxicity_min = 0.4
            """
        )
        assert settings.judge.model_name == "llama3"
        assert settings.judge.max_retries == 3
        assert settings.use_mock is True
        assert settings.predictor_endpoints["reflection"].timeout_ms == 1500
        assert settings.max_concurrency == 6
        assert settings.scopes == "session_only"
        assert settings.low_score_flag_max == 3
        assert settings.toxicity_flag_min == 0.4

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigInvalid):
            parse_config_text("judge.modle_name = oops")

    def test_bad_bool(self):
        with pytest.raises(ConfigInvalid):
            parse_config_text("predictors.mock = maybe")

    def test_bad_scope(self):
        with pytest.raises(ConfigInvalid):
            parse_config_text("scopes = everything")

    def test_unknown_predictor_kind(self):
        with pytest.raises(ConfigInvalid):
            parse_config_text("predictors.frobnicator.base_url = http://x")

    def test_defaults(self):
        settings = parse_config_text("")
        assert settings.max_concurrency == 4
        assert settings.scopes == "turn_and_session"
        assert settings.use_mock is False
