from __future__ import annotations

import json

import pytest

from dialogue_audit.cli import cli_dispatch
from dialogue_audit.transcript import serialize_transcript
from tests.conftest import build_fixture_transcript


@pytest.fixture()
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture()
def config_file(workdir):
    path = workdir / "audit.conf"
    path.write_text(
        "predictors.mock = true\n"
        f"cache.dir = {workdir / 'cache'}\n"
        f"state.dir = {workdir / 'state'}\n"
    )
    return str(path)


@pytest.fixture()
def transcript_file(workdir):
    path = workdir / "session.txt"
    path.write_text(serialize_transcript(build_fixture_transcript(30), "plain_text"))
    return str(path)


class TestMetricsList:
    def test_category_filter_two_lines(self, capsys):
        code = cli_dispatch(["metrics", "list", "--category", "Crisis & Trauma"])
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 2

    def test_json_totals(self, capsys):
        code = cli_dispatch(["metrics", "list", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["totals"]["literature"] == 69
        assert payload["totals"]["model_based"] == 12
        assert list(payload["category_counts"].values()) == [10, 10, 11, 2, 9, 3, 12, 3, 3, 4, 2]

    def test_family_filter(self, capsys):
        code = cli_dispatch(["metrics", "list", "--family", "model"])
        assert code == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 12


class TestUsageErrors:
    def test_evaluate_missing_transcript_flag(self, capsys):
        code = cli_dispatch(["evaluate", "--format", "plain_text", "--all"])
        assert code == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand(self):
        assert cli_dispatch(["frobnicate"]) == 2

    def test_no_stack_trace_for_missing_file(self, capsys, config_file):
        code = cli_dispatch(
            ["evaluate", "--transcript", "nope.txt", "--format", "plain_text",
             "--metrics", "empathy", "--config", config_file]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert "Traceback" not in err


class TestEvaluate:
    def test_end_to_end_mock(self, capsys, workdir, config_file, transcript_file):
        out_file = workdir / "report.json"
        code = cli_dispatch(
            [
                "evaluate",
                "--transcript", transcript_file,
                "--format", "plain_text",
                "--metrics", "empathy,reflective-listening,reflection",
                "--config", config_file,
                "--out", str(out_file),
            ]
        )
        assert code == 0
        report = json.loads(out_file.read_text())
        assert {r["metric_id"] for r in report["results"]} == {
            "empathy", "reflective-listening", "reflection",
        }
        assert report["errors"] == []

    def test_stdout_when_no_out(self, capsys, config_file, transcript_file):
        code = cli_dispatch(
            [
                "evaluate",
                "--transcript", transcript_file,
                "--format", "plain_text",
                "--metrics", "empathy",
                "--config", config_file,
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["results"][0]["metric_id"] == "empathy"

    def test_mock_flag_without_config(self, capsys, workdir, transcript_file):
        code = cli_dispatch(
            [
                "evaluate",
                "--transcript", transcript_file,
                "--format", "plain_text",
                "--metrics", "empathy",
                "--mock",
            ]
        )
        assert code == 0


class TestBatch:
    def _fill_dir(self, path, valid=3, malformed=0):
        path.mkdir(parents=True, exist_ok=True)
        for i in range(valid):
            (path / f"ok_{i}.txt").write_text(
                f"Seeker: I am struggling with situation {i}.\n"
                f"Supporter: Tell me more about situation {i}."
            )
        for i in range(malformed):
            (path / f"bad_{i}.txt").write_text("no role prefix here\n")

    def test_nine_valid_one_malformed_exit_1(self, capsys, workdir, config_file):
        src = workdir / "in"
        self._fill_dir(src, valid=9, malformed=1)
        code = cli_dispatch(
            ["batch", "--dir", str(src), "--out-dir", str(workdir / "out"),
             "--metrics", "empathy", "--config", config_file]
        )
        assert code == 1
        reports = list((workdir / "out").glob("*.report.json"))
        assert len(reports) == 9
        summary = json.loads((workdir / "out" / "batch_summary.json").read_text())
        failed = [f for f in summary["files"] if f["status"] != "ok"]
        assert len(failed) == 1 and failed[0]["file"] == "bad_0.txt"

    def test_all_valid_exit_0(self, workdir, config_file):
        src = workdir / "in2"
        self._fill_dir(src, valid=10)
        code = cli_dispatch(
            ["batch", "--dir", str(src), "--out-dir", str(workdir / "out2"),
             "--metrics", "empathy", "--config", config_file]
        )
        assert code == 0
        assert len(list((workdir / "out2").glob("*.report.json"))) == 10


class TestRubricScripted:
    def test_draft_revise_finalize(self, capsys, workdir, config_file):
        feedback = workdir / "feedback.txt"
        feedback.write_text("anchor 5 must require permission-asking\ntighten level 1\n")
        code = cli_dispatch(
            ["rubric", "new", "--description", "penalizes unsolicited advice",
             "--feedback-file", str(feedback), "--examples", "2",
             "--config", config_file]
        )
        assert code == 0
        out = capsys.readouterr().out.strip().splitlines()
        metric_id = out[-1]
        assert metric_id == "penalizes-unsolicited-advice"

        capsys.readouterr()
        code = cli_dispatch(["metrics", "list", "--json", "--config", config_file])
        payload = json.loads(capsys.readouterr().out)
        assert payload["totals"]["custom"] == 1
        assert any(m["id"] == metric_id for m in payload["metrics"])

    def test_duplicate_second_run_fails_cleanly(self, capsys, workdir, config_file):
        argv = ["rubric", "new", "--description", "notices sarcasm", "--config", config_file]
        assert cli_dispatch(argv) == 0
        capsys.readouterr()
        assert cli_dispatch(argv) == 1
        assert "error:" in capsys.readouterr().err


class TestReportExportAndQuery:
    @pytest.fixture()
    def report_file(self, workdir, config_file, transcript_file):
        out_file = workdir / "report.json"
        cli_dispatch(
            ["evaluate", "--transcript", transcript_file, "--format", "plain_text",
             "--metrics", "empathy,toxicity-a", "--config", config_file,
             "--out", str(out_file)]
        )
        return out_file

    def test_export_csv(self, workdir, report_file):
        out = workdir / "report.csv"
        code = cli_dispatch(
            ["report", "export", "--report", str(report_file), "--format", "csv", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 15 + 30  # header + empathy supporter turns + toxicity all turns

    def test_export_html(self, workdir, report_file):
        out = workdir / "report.html"
        assert cli_dispatch(
            ["report", "export", "--report", str(report_file), "--format", "html", "--out", str(out)]
        ) == 0
        assert out.read_text().startswith("<!DOCTYPE html>")

    def test_export_json_round_trip(self, workdir, report_file):
        out = workdir / "again.json"
        cli_dispatch(
            ["report", "export", "--report", str(report_file), "--format", "json", "--out", str(out)]
        )
        assert json.loads(out.read_text()) == json.loads(report_file.read_text())

    def test_query_grounded(self, capsys, workdir, config_file, report_file):
        code = cli_dispatch(
            ["query", "--report", str(report_file), "--question",
             "What was the empathy score at turn 5?", "--config", config_file]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["kind"] == "answer"
        assert payload["citations"]

    def test_query_out_of_scope(self, capsys, workdir, config_file, report_file):
        code = cli_dispatch(
            ["query", "--report", str(report_file), "--question",
             "Which stocks should I buy?", "--config", config_file]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["kind"] == "refusal"
        assert payload["reason"] == "no_relevant_results"


class TestRubricInteractive:
    def test_full_interactive_session(self, capsys, workdir, config_file, monkeypatch):
        replies = iter(
            [
                "tracks grounding offers",
                "feedback anchor 5 needs a sensory step",
                "examples 2",
                "finalize",
            ]
        )
        monkeypatch.setattr("builtins.input", lambda prompt="": next(replies))
        code = cli_dispatch(["rubric", "new", "--interactive", "--config", config_file])
        assert code == 0
        out = capsys.readouterr().out
        assert "registered custom metric: tracks-grounding-offers" in out
        assert "[expected" in out  # calibration examples were shown

    def test_abandon_then_gc(self, capsys, workdir, config_file, monkeypatch):
        replies = iter(["notices stonewalling", "abandon"])
        monkeypatch.setattr("builtins.input", lambda prompt="": next(replies))
        assert cli_dispatch(["rubric", "new", "--interactive", "--config", config_file]) == 0
        capsys.readouterr()
        assert cli_dispatch(["rubric", "gc", "--config", config_file]) == 0
        assert "removed 1 abandoned session(s)" in capsys.readouterr().out
        sessions_dir = workdir / "state" / "sessions"
        assert list(sessions_dir.glob("*.json")) == []

    def test_eof_aborts_cleanly(self, capsys, workdir, config_file, monkeypatch):
        def raise_eof(prompt=""):
            raise EOFError

        monkeypatch.setattr("builtins.input", raise_eof)
        code = cli_dispatch(["rubric", "new", "--interactive", "--config", config_file])
        assert code == 1
        assert "Traceback" not in capsys.readouterr().err
