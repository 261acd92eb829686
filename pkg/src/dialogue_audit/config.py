"""Flat key/value engine configuration.

Files use one ``key = value`` pair per line with dotted keys, ``#`` comments,
and blank lines ignored. Unknown keys are rejected so typos surface instead
of silently falling back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigInvalid
from .judge import JudgeBackendConfig
from .predictors import PREDICTOR_KINDS, PredictorEndpoint
from .report import LOW_SCORE_FLAG_MAX, TOXICITY_FLAG_MIN

DEFAULT_JUDGE_ENDPOINT = "http://localhost:11434/v1/chat/completions"
DEFAULT_STATE_DIR = ".dialogue-audit"

SCOPE_CHOICES = ("turn_and_session", "session_only")

_SIMPLE_KEYS = {
    "judge.endpoint_url",
    "judge.model_name",
    "judge.temperature",
    "judge.max_output_tokens",
    "judge.max_retries",
    "judge.api_key_env",
    "predictors.mock",
    "cache.dir",
    "max_concurrency",
    "scopes",
    "state.dir",
    "flags.low_rubric_score_max",
    "flags.high_toxicity_min",
    "evidence.snippets_dir",
}
_ENDPOINT_SUBKEYS = {"base_url", "timeout_ms", "auth_env"}


@dataclass
class EngineSettings:
    judge: JudgeBackendConfig = field(
        default_factory=lambda: JudgeBackendConfig(
            endpoint_url=DEFAULT_JUDGE_ENDPOINT, model_name="default"
        )
    )
    predictor_endpoints: dict[str, PredictorEndpoint] = field(default_factory=dict)
    use_mock: bool = False
    cache_dir: Path | None = None
    max_concurrency: int = 4
    scopes: str = "turn_and_session"
    state_dir: Path = Path(DEFAULT_STATE_DIR)
    low_score_flag_max: int = LOW_SCORE_FLAG_MAX
    toxicity_flag_min: float = TOXICITY_FLAG_MIN
    snippets_dir: Path | None = None


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigInvalid(f"{key}: expected a boolean, got {value!r}")


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigInvalid(f"{key}: expected an integer, got {value!r}") from None


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigInvalid(f"{key}: expected a number, got {value!r}") from None


def parse_config_text(text: str) -> EngineSettings:
    pairs: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigInvalid(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in pairs:
            raise ConfigInvalid(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value

    endpoint_parts: dict[str, dict[str, str]] = {}
    judge_kwargs: dict = {}
    settings = EngineSettings()

    for key, value in pairs.items():
        if key in _SIMPLE_KEYS:
            continue
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "predictors" and parts[2] in _ENDPOINT_SUBKEYS:
            kind = parts[1]
            if kind not in PREDICTOR_KINDS:
                raise ConfigInvalid(f"unknown predictor kind in key {key!r}")
            endpoint_parts.setdefault(kind, {})[parts[2]] = value
            continue
        raise ConfigInvalid(f"unknown config key {key!r}")

    if "judge.endpoint_url" in pairs:
        judge_kwargs["endpoint_url"] = pairs["judge.endpoint_url"]
    if "judge.model_name" in pairs:
        judge_kwargs["model_name"] = pairs["judge.model_name"]
    if "judge.temperature" in pairs:
        judge_kwargs["temperature"] = _parse_float("judge.temperature", pairs["judge.temperature"])
    if "judge.max_output_tokens" in pairs:
        judge_kwargs["max_output_tokens"] = _parse_int(
            "judge.max_output_tokens", pairs["judge.max_output_tokens"]
        )
    if "judge.max_retries" in pairs:
        judge_kwargs["max_retries"] = _parse_int("judge.max_retries", pairs["judge.max_retries"])
    if "judge.api_key_env" in pairs:
        judge_kwargs["api_key_env"] = pairs["judge.api_key_env"]
    if judge_kwargs:
        judge_kwargs.setdefault("endpoint_url", DEFAULT_JUDGE_ENDPOINT)
        judge_kwargs.setdefault("model_name", "default")
        try:
            settings.judge = JudgeBackendConfig(**judge_kwargs)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None

    for kind, parts in endpoint_parts.items():
        if "base_url" not in parts:
            raise ConfigInvalid(f"predictors.{kind}: missing base_url")
        try:
            settings.predictor_endpoints[kind] = PredictorEndpoint(
                kind=kind,
                base_url=parts["base_url"],
                timeout_ms=_parse_int(f"predictors.{kind}.timeout_ms", parts["timeout_ms"])
                if "timeout_ms" in parts
                else 30_000,
                auth_env=parts.get("auth_env"),
            )
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None

    if "predictors.mock" in pairs:
        settings.use_mock = _parse_bool("predictors.mock", pairs["predictors.mock"])
    if "cache.dir" in pairs:
        settings.cache_dir = Path(pairs["cache.dir"])
    if "max_concurrency" in pairs:
        settings.max_concurrency = _parse_int("max_concurrency", pairs["max_concurrency"])
        if settings.max_concurrency < 1:
            raise ConfigInvalid("max_concurrency must be >= 1")
    if "scopes" in pairs:
        if pairs["scopes"] not in SCOPE_CHOICES:
            raise ConfigInvalid(
                f"scopes must be one of {', '.join(SCOPE_CHOICES)}, got {pairs['scopes']!r}"
            )
        settings.scopes = pairs["scopes"]
    if "state.dir" in pairs:
        settings.state_dir = Path(pairs["state.dir"])
    if "flags.low_rubric_score_max" in pairs:
        settings.low_score_flag_max = _parse_int(
            "flags.low_rubric_score_max", pairs["flags.low_rubric_score_max"]
        )
    if "flags.high_toxicity_min" in pairs:
        settings.toxicity_flag_min = _parse_float(
            "flags.high_toxicity_min", pairs["flags.high_toxicity_min"]
        )
    if "evidence.snippets_dir" in pairs:
        settings.snippets_dir = Path(pairs["evidence.snippets_dir"])

    return settings


def load_config(path: Path | str | None) -> EngineSettings:
    if path is None:
        return EngineSettings()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)
