"""Command-line interface (``audit``).

Exit codes: 0 full success, 1 partial failure or expected runtime error,
2 usage error. Expected errors print a single stderr line, never a stack
trace.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .builder import (
    SessionStore,
    abandon,
    draft_rubric,
    finalize,
    generate_calibration_examples,
    revise_rubric,
)
from .cache import ContentCache
from .config import EngineSettings, load_config
from .errors import AuditError
from .judge import HttpJudgeClient, MockJudgeClient
from .orchestrator import EvaluationRequest, run_batch, run_evaluation
from .query import answer_query
from .registry import Registry, load_library
from .report import export, report_from_json, report_to_json
from .transcript import SOURCES, parse_transcript

FAMILY_FLAG_MAP = {"model": "model_based", "rubric": "rubric_based"}


def _settings(args) -> EngineSettings:
    settings = load_config(getattr(args, "config", None))
    if getattr(args, "mock", False):
        settings.use_mock = True
    return settings


def _registry(settings: EngineSettings) -> Registry:
    return load_library(custom_store=settings.state_dir / "custom_metrics.json")


def _judge_client(settings: EngineSettings):
    return MockJudgeClient() if settings.use_mock else HttpJudgeClient(settings.judge)


def _metric_ids(args, registry: Registry) -> list[str]:
    if getattr(args, "all", False):
        return [s.id for s in registry.list_metrics()]
    if not getattr(args, "metrics", None):
        raise AuditError("provide --metrics id1,id2 or --all")
    return [m.strip() for m in args.metrics.split(",") if m.strip()]


def _cmd_metrics_list(args) -> int:
    settings = _settings(args)
    registry = _registry(settings)
    family = FAMILY_FLAG_MAP.get(args.family) if args.family else None
    summaries = registry.list_metrics(family=family, category=args.category)
    if args.json:
        literature = sum(
            1 for s in registry.list_metrics() if s.family == "rubric_based" and s.origin == "literature"
        )
        custom = len(registry.list_metrics(origin="custom"))
        payload = {
            "metrics": [s.to_dict() for s in summaries],
            "totals": {
                "model_based": len(registry.model_metrics),
                "literature": literature,
                "custom": custom,
            },
            "category_counts": registry.category_counts(),
        }
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        for summary in summaries:
            print(f"{summary.id:<40} {summary.family:<12} {summary.category}")
    return 0


def _cmd_evaluate(args) -> int:
    settings = _settings(args)
    registry = _registry(settings)
    raw = Path(args.transcript).read_bytes()
    transcript = parse_transcript(raw, args.format)
    request = EvaluationRequest(
        transcript=transcript,
        metric_ids=_metric_ids(args, registry),
        judge=settings.judge,
        predictor_endpoints=settings.predictor_endpoints,
        max_concurrency=settings.max_concurrency,
        scopes=settings.scopes,
        use_mock=settings.use_mock,
    )
    cache = ContentCache(settings.cache_dir)
    retriever = None
    if settings.snippets_dir is not None:
        from .factuality import LocalSnippetRetriever

        retriever = LocalSnippetRetriever(settings.snippets_dir)
    report = run_evaluation(
        request,
        registry,
        cache=cache,
        retriever=retriever,
        low_score_flag_max=settings.low_score_flag_max,
        toxicity_flag_min=settings.toxicity_flag_min,
    )
    payload = report_to_json(report)
    if args.out:
        Path(args.out).write_text(payload)
        print(f"report written to {args.out}", file=sys.stderr)
    else:
        print(payload, end="")
    if report.errors:
        for error in report.errors:
            print(f"metric {error.metric_id} failed ({error.stage}): {error.message}", file=sys.stderr)
        return 1
    return 0


def _cmd_batch(args) -> int:
    settings = _settings(args)
    registry = _registry(settings)
    # template transcript is a placeholder; run_batch parses each file itself
    metric_ids = _metric_ids(args, registry)
    template = EvaluationRequest(
        transcript=parse_transcript("Seeker: placeholder", "plain_text"),
        metric_ids=metric_ids,
        judge=settings.judge,
        predictor_endpoints=settings.predictor_endpoints,
        max_concurrency=settings.max_concurrency,
        scopes=settings.scopes,
        use_mock=settings.use_mock,
    )
    summary = run_batch(
        args.dir,
        template,
        args.out_dir,
        registry,
        settings=settings,
        cache=ContentCache(settings.cache_dir),
        transcript_format=args.format,
    )
    summary_path = Path(args.out_dir) / "batch_summary.json"
    summary_path.write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    for entry in summary.files:
        marker = "ok " if entry.status == "ok" else "ERR"
        detail = f" ({entry.detail})" if entry.detail else ""
        print(f"[{marker}] {entry.file}{detail}")
    print(
        f"{summary.succeeded}/{summary.total} transcripts evaluated; "
        f"summary at {summary_path}"
    )
    return 0 if summary.all_ok else 1


def _print_draft(session) -> None:
    from .registry import rubric_to_dict

    print(json.dumps(rubric_to_dict(session.current_draft), indent=2, ensure_ascii=False))


def _cmd_rubric_new(args) -> int:
    settings = _settings(args)
    registry = _registry(settings)
    client = _judge_client(settings)
    store = SessionStore(settings.state_dir)

    if args.interactive:
        return _interactive_rubric(client, registry, store)

    if not args.description:
        raise AuditError("scripted mode needs --description (or use --interactive)")
    session = draft_rubric(client, args.description, args.constraint or [], store=store)
    if args.feedback_file:
        for line in Path(args.feedback_file).read_text().splitlines():
            feedback = line.strip()
            if feedback:
                revise_rubric(session, feedback, client, store=store)
    if args.examples:
        examples = generate_calibration_examples(session, args.examples, client, store=store)
        for example in examples:
            print(
                f"example (expected {example.expected_score}): "
                f"{example.rationale}",
                file=sys.stderr,
            )
    metric_id = finalize(session, registry, store=store)
    _print_draft(session)
    print(f"registered custom metric: {metric_id}", file=sys.stderr)
    print(metric_id)
    return 0


def _interactive_rubric(client, registry: Registry, store: SessionStore) -> int:
    try:
        description = input("Describe the metric to build: ").strip()
        if not description:
            print("nothing to do", file=sys.stderr)
            return 1
        session = draft_rubric(client, description, [], store=store)
        _print_draft(session)
        print("commands: feedback <text> | examples <n> | finalize | abandon")
        while True:
            line = input("> ").strip()
            if not line:
                continue
            command, _, rest = line.partition(" ")
            if command == "feedback" and rest:
                revise_rubric(session, rest, client, store=store)
                _print_draft(session)
            elif command == "examples":
                n = int(rest or "3")
                for example in generate_calibration_examples(session, n, client, store=store):
                    print(f"[expected {example.expected_score}] {example.rationale}")
                    for turn in example.dialogue_snippet.turns:
                        print(f"  {turn.role}: {turn.text}")
            elif command == "finalize":
                metric_id = finalize(session, registry, store=store)
                print(f"registered custom metric: {metric_id}")
                return 0
            elif command == "abandon":
                abandon(session, store=store)
                print("session abandoned")
                return 0
            else:
                print("commands: feedback <text> | examples <n> | finalize | abandon")
    except (EOFError, KeyboardInterrupt):
        print("\naborted", file=sys.stderr)
        return 1


def _cmd_rubric_gc(args) -> int:
    settings = _settings(args)
    store = SessionStore(settings.state_dir)
    removed = 0
    for session_id in store.list_ids():
        session = store.load(session_id)
        if session.state == "abandoned":
            store.delete(session_id)
            removed += 1
    print(f"removed {removed} abandoned session(s)")
    return 0


def _cmd_report_export(args) -> int:
    report = report_from_json(Path(args.report).read_text())
    export(report, args.format, args.out)
    print(f"wrote {args.format} to {args.out}", file=sys.stderr)
    return 0


def _cmd_query(args) -> int:
    settings = _settings(args)
    registry = _registry(settings)
    report = report_from_json(Path(args.report).read_text())
    result = answer_query(report, args.question, _judge_client(settings), registry)
    print(json.dumps(result.to_dict(), indent=2, ensure_ascii=False))
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    settings = _settings(args)
    static_dir = args.static_dir
    if static_dir is None:
        candidate = Path("frontend") / "dist"
        static_dir = candidate if candidate.is_dir() else None
    serve(settings, port=args.port, host=args.host, static_dir=static_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="audit",
        description="Audit mental-health support dialogues with model-based and "
        "rubric-based metrics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    metrics = sub.add_parser("metrics", help="inspect the metric registry")
    metrics_sub = metrics.add_subparsers(dest="metrics_command", required=True)
    metrics_list = metrics_sub.add_parser("list", help="list available metrics")
    metrics_list.add_argument("--category")
    metrics_list.add_argument("--family", choices=["model", "rubric"])
    metrics_list.add_argument("--json", action="store_true")
    metrics_list.add_argument("--config")
    metrics_list.set_defaults(func=_cmd_metrics_list)

    evaluate = sub.add_parser("evaluate", help="evaluate one transcript")
    evaluate.add_argument("--transcript", required=True)
    evaluate.add_argument("--format", choices=list(SOURCES), required=True)
    group = evaluate.add_mutually_exclusive_group(required=True)
    group.add_argument("--metrics", help="comma-separated metric ids")
    group.add_argument("--all", action="store_true", help="run every registered metric")
    evaluate.add_argument("--config")
    evaluate.add_argument("--mock", action="store_true", help="use deterministic offline backends")
    evaluate.add_argument("--out", help="report JSON path (default: stdout)")
    evaluate.set_defaults(func=_cmd_evaluate)

    batch = sub.add_parser("batch", help="evaluate a directory of transcripts")
    batch.add_argument("--dir", required=True)
    batch.add_argument("--out-dir", required=True)
    group = batch.add_mutually_exclusive_group(required=True)
    group.add_argument("--metrics")
    group.add_argument("--all", action="store_true")
    batch.add_argument("--format", choices=list(SOURCES), help="force one format (default: sniff)")
    batch.add_argument("--config")
    batch.add_argument("--mock", action="store_true")
    batch.set_defaults(func=_cmd_batch)

    rubric = sub.add_parser("rubric", help="author custom rubric metrics")
    rubric_sub = rubric.add_subparsers(dest="rubric_command", required=True)
    rubric_new = rubric_sub.add_parser("new", help="draft and register a custom rubric")
    rubric_new.add_argument("--interactive", action="store_true")
    rubric_new.add_argument("--description")
    rubric_new.add_argument("--constraint", action="append", help="repeatable constraint line")
    rubric_new.add_argument("--feedback-file", help="file with one revision instruction per line")
    rubric_new.add_argument("--examples", type=int, default=0, help="calibration examples to show")
    rubric_new.add_argument("--config")
    rubric_new.add_argument("--mock", action="store_true")
    rubric_new.set_defaults(func=_cmd_rubric_new)
    rubric_gc = rubric_sub.add_parser("gc", help="delete abandoned builder sessions")
    rubric_gc.add_argument("--config")
    rubric_gc.set_defaults(func=_cmd_rubric_gc)

    report = sub.add_parser("report", help="work with saved reports")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    report_export = report_sub.add_parser("export", help="convert a report to another format")
    report_export.add_argument("--report", required=True)
    report_export.add_argument("--format", choices=["json", "csv", "html"], required=True)
    report_export.add_argument("--out", required=True)
    report_export.set_defaults(func=_cmd_report_export)

    query = sub.add_parser("query", help="ask a grounded question about a report")
    query.add_argument("--report", required=True)
    query.add_argument("--question", required=True)
    query.add_argument("--config")
    query.add_argument("--mock", action="store_true")
    query.set_defaults(func=_cmd_query)

    serve_cmd = sub.add_parser("serve", help="run the HTTP service")
    serve_cmd.add_argument("--port", type=int, default=8000)
    serve_cmd.add_argument("--host", default="127.0.0.1")
    serve_cmd.add_argument("--config")
    serve_cmd.add_argument("--mock", action="store_true")
    serve_cmd.add_argument("--static-dir", help="directory of web UI assets to serve at /")
    serve_cmd.set_defaults(func=_cmd_serve)

    return parser


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        return args.func(args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> None:
    sys.exit(cli_dispatch(argv))


if __name__ == "__main__":
    main()
