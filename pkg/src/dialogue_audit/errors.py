"""Exception types shared across the engine.

Every expected failure surfaces as an ``AuditError`` subclass so the CLI and
service can map it to an exit code or HTTP status without pattern-matching on
message text.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all expected engine errors."""

    code = "audit_error"


# --------------------------------------------------------------------------
# transcript
# --------------------------------------------------------------------------

class EmptyTranscript(AuditError):
    code = "empty_transcript"


class MalformedInput(AuditError):
    code = "malformed_input"

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnknownRole(AuditError):
    code = "unknown_role"

    def __init__(self, role: str) -> None:
        super().__init__(f"role label {role!r} has no seeker/supporter mapping")
        self.role = role


class SpanOutOfRange(AuditError):
    code = "span_out_of_range"


class QuoteNotFound(AuditError):
    code = "quote_not_found"

    def __init__(self, message: str, closest: str = "") -> None:
        super().__init__(message)
        self.closest = closest


# --------------------------------------------------------------------------
# metric registry
# --------------------------------------------------------------------------

class DuplicateMetricId(AuditError):
    code = "duplicate_metric_id"


class SchemaViolation(AuditError):
    code = "schema_violation"

    def __init__(self, message: str, violations: list[str] | None = None) -> None:
        super().__init__(message)
        self.violations = violations or []


class CountMismatch(AuditError):
    code = "count_mismatch"


class UnknownCategory(AuditError):
    code = "unknown_category"


class UnknownMetric(AuditError):
    code = "unknown_metric"


# --------------------------------------------------------------------------
# predictor gateway
# --------------------------------------------------------------------------

class PredictorError(AuditError):
    """Base for predictor-call failures; carries kind and turn for the report."""

    code = "predictor_error"

    def __init__(self, message: str, kind: str = "", turn_index: int | None = None) -> None:
        super().__init__(message)
        self.kind = kind
        self.turn_index = turn_index


class EndpointUnreachable(PredictorError):
    code = "endpoint_unreachable"


class BadResponseSchema(PredictorError):
    code = "bad_response_schema"


class PredictorTimeout(PredictorError):
    code = "predictor_timeout"


class RoleMismatch(AuditError):
    code = "role_mismatch"


class RetrieverFailure(AuditError):
    code = "retriever_failure"


# --------------------------------------------------------------------------
# judge
# --------------------------------------------------------------------------

PARSE_FAILURE_REASONS = ("no_json", "bad_schema", "score_out_of_range", "empty_justification")


class ParseFailure(AuditError):
    code = "parse_failure"

    def __init__(self, reason: str, detail: str = "") -> None:
        if reason not in PARSE_FAILURE_REASONS:
            raise ValueError(f"unknown parse-failure reason {reason!r}")
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class JudgeFailure(AuditError):
    code = "judge_failure"

    def __init__(self, message: str, attempts: int = 0) -> None:
        super().__init__(message)
        self.attempts = attempts


class BackendUnreachable(AuditError):
    code = "backend_unreachable"


class AuthMissing(AuditError):
    code = "auth_missing"


# --------------------------------------------------------------------------
# rubric builder
# --------------------------------------------------------------------------

class DraftInvalid(AuditError):
    code = "draft_invalid"

    def __init__(self, message: str, violations: list[str] | None = None) -> None:
        super().__init__(message)
        self.violations = violations or []


class SessionFinalized(AuditError):
    code = "session_finalized"


class ExampleInvalid(AuditError):
    code = "example_invalid"


# --------------------------------------------------------------------------
# orchestrator / reporting / service
# --------------------------------------------------------------------------

class InvalidRequest(AuditError):
    code = "invalid_request"


class AllMetricsFailed(AuditError):
    code = "all_metrics_failed"


class NoTranscriptsFound(AuditError):
    code = "no_transcripts_found"


class MixedPayloadTypes(AuditError):
    code = "mixed_payload_types"


class NotPlottable(AuditError):
    code = "not_plottable"


class IoFailure(AuditError):
    code = "io_failure"


class ConfigInvalid(AuditError):
    code = "config_invalid"


class PortInUse(AuditError):
    code = "port_in_use"
