"""Metric data model and registry.

The shipped library holds 69 literature-derived rubrics (one JSON file per
category, pinned by a checksum manifest) plus 12 model-based metric specs.
Custom rubrics live in a separate store file so library upgrades never
clobber user work.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import (
    CountMismatch,
    DuplicateMetricId,
    SchemaViolation,
    UnknownCategory,
    UnknownMetric,
)

logger = logging.getLogger(__name__)

METRIC_ID_PATTERN = re.compile(r"^[a-z0-9]+(-[a-z0-9]+)*$")

# Category order is also the display/listing order.
RUBRIC_CATEGORIES = (
    "Core Conditions",
    "Communication Skills",
    "CBT Techniques",
    "Relationship Repair",
    "Session Management",
    "MI Techniques",
    "Advanced Skills",
    "Solution-Focused",
    "Mindfulness & Body",
    "Emotion Processing",
    "Crisis & Trauma",
)

RUBRIC_CATEGORY_COUNTS = {
    "Core Conditions": 10,
    "Communication Skills": 10,
    "CBT Techniques": 11,
    "Relationship Repair": 2,
    "Session Management": 9,
    "MI Techniques": 3,
    "Advanced Skills": 12,
    "Solution-Focused": 3,
    "Mindfulness & Body": 3,
    "Emotion Processing": 4,
    "Crisis & Trauma": 2,
}

MODEL_CATEGORIES = (
    "Empathy",
    "Emotion",
    "Talk Type",
    "Support Strategy",
    "Reflection",
    "Toxicity",
    "Factuality",
)

ANCHOR_LABELS = {1: "low", 3: "medium", 5: "high"}

FAMILY_MODEL = "model_based"
FAMILY_RUBRIC = "rubric_based"


@dataclass(frozen=True)
class RubricAnchor:
    level: int
    label: str
    description: str


@dataclass(frozen=True)
class RubricSpec:
    """A rubric metric: definition, 1-5 scale, and behavioral anchors at 1/3/5."""

    id: str
    name: str
    category: str
    definition: str
    anchors: tuple[RubricAnchor, ...]
    references: tuple[str, ...] = ()
    scale_min: int = 1
    scale_max: int = 5
    origin: str = "literature"
    version: int = 1
    authored: bool = True

    @property
    def family(self) -> str:
        return FAMILY_RUBRIC


@dataclass(frozen=True)
class ModelMetricSpec:
    """A metric produced by a task-specific predictor behind the wire contract."""

    id: str
    name: str
    predictor: str
    output_schema: str  # categorical | score01 | trigger_relations
    target_role: str  # seeker | supporter | both
    granularity: str  # per_turn | per_session
    category: str = ""
    labels: tuple[str, ...] = ()
    attributes: tuple[str, ...] = ()
    inferred_from_citation: bool = False

    @property
    def family(self) -> str:
        return FAMILY_MODEL

    def __post_init__(self) -> None:
        if self.output_schema == "categorical":
            if not self.labels or len(set(self.labels)) != len(self.labels):
                raise SchemaViolation(
                    f"metric {self.id}: categorical label list must be non-empty "
                    f"and duplicate-free"
                )


MetricSpec = RubricSpec | ModelMetricSpec


def validate_rubric(spec: RubricSpec) -> list[str]:
    """Return every violated rubric invariant (empty list means valid)."""

    violations: list[str] = []
    if not METRIC_ID_PATTERN.match(spec.id or ""):
        violations.append("id-not-kebab-case")
    if not spec.name.strip():
        violations.append("name-empty")
    if spec.category not in RUBRIC_CATEGORIES:
        violations.append("category-unknown")
    if not spec.definition.strip():
        violations.append("definition-empty")
    if spec.scale_min != 1 or spec.scale_max != 5:
        violations.append("scale-must-be-1-to-5")
    levels = sorted(anchor.level for anchor in spec.anchors)
    if levels != [1, 3, 5]:
        violations.append("anchors-must-cover-1-3-5")
    for anchor in spec.anchors:
        expected = ANCHOR_LABELS.get(anchor.level)
        if expected is not None and anchor.label != expected:
            violations.append("anchor-label-mismatch")
        if not anchor.description.strip():
            violations.append("anchor-description-empty")
    if spec.origin not in ("literature", "custom"):
        violations.append("origin-unknown")
    if spec.version < 1:
        violations.append("version-below-1")
    return violations


def rubric_to_dict(spec: RubricSpec) -> dict:
    return {
        "id": spec.id,
        "name": spec.name,
        "category": spec.category,
        "definition": spec.definition,
        "scale": {"min": spec.scale_min, "max": spec.scale_max},
        "anchors": [
            {"level": a.level, "label": a.label, "description": a.description}
            for a in spec.anchors
        ],
        "references": list(spec.references),
        "authored": spec.authored,
        "origin": spec.origin,
        "version": spec.version,
    }


def rubric_from_dict(doc: dict, default_origin: str = "literature") -> RubricSpec:
    try:
        anchors = tuple(
            RubricAnchor(
                level=int(a["level"]), label=str(a["label"]), description=str(a["description"])
            )
            for a in doc["anchors"]
        )
        scale = doc.get("scale", {"min": 1, "max": 5})
        return RubricSpec(
            id=str(doc["id"]),
            name=str(doc["name"]),
            category=str(doc["category"]),
            definition=str(doc["definition"]),
            anchors=anchors,
            references=tuple(str(r) for r in doc.get("references", [])),
            scale_min=int(scale.get("min", 1)),
            scale_max=int(scale.get("max", 5)),
            origin=str(doc.get("origin", default_origin)),
            version=int(doc.get("version", 1)),
            authored=bool(doc.get("authored", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed rubric entry: {exc}") from None


def model_metric_from_dict(doc: dict) -> ModelMetricSpec:
    try:
        return ModelMetricSpec(
            id=str(doc["id"]),
            name=str(doc["name"]),
            predictor=str(doc["predictor"]),
            output_schema=str(doc["output_schema"]),
            target_role=str(doc["target_role"]),
            granularity=str(doc["granularity"]),
            category=str(doc.get("category", "")),
            labels=tuple(str(x) for x in doc.get("labels", [])),
            attributes=tuple(str(x) for x in doc.get("attributes", [])),
            inferred_from_citation=bool(doc.get("inferred_from_citation", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"malformed model-metric entry: {exc}") from None


@dataclass
class MetricSummary:
    id: str
    name: str
    family: str
    category: str
    origin: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "family": self.family,
            "category": self.category,
            "origin": self.origin,
        }


class Registry:
    """All metrics known to the engine, keyed by id.

    Immutable after load except :meth:`register_custom`, which is serialized
    behind a lock; reads need no locking once loaded.
    """

    def __init__(self, custom_store: Path | None = None) -> None:
        self._metrics: dict[str, MetricSpec] = {}
        self._custom_store = custom_store
        self._write_lock = threading.Lock()

    # -- construction -------------------------------------------------------

    def _add(self, spec: MetricSpec) -> None:
        if not METRIC_ID_PATTERN.match(spec.id):
            raise SchemaViolation(f"metric id {spec.id!r} is not kebab-case")
        if spec.id in self._metrics:
            raise DuplicateMetricId(f"metric id {spec.id!r} already registered")
        self._metrics[spec.id] = spec

    # -- lookup -------------------------------------------------------------

    def get(self, metric_id: str) -> MetricSpec:
        try:
            return self._metrics[metric_id]
        except KeyError:
            raise UnknownMetric(f"no metric with id {metric_id!r}") from None

    def __contains__(self, metric_id: str) -> bool:
        return metric_id in self._metrics

    def __len__(self) -> int:
        return len(self._metrics)

    @property
    def rubrics(self) -> list[RubricSpec]:
        return [m for m in self._metrics.values() if isinstance(m, RubricSpec)]

    @property
    def model_metrics(self) -> list[ModelMetricSpec]:
        return [m for m in self._metrics.values() if isinstance(m, ModelMetricSpec)]

    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for spec in self.rubrics:
            if spec.origin == "literature":
                counts[spec.category] = counts.get(spec.category, 0) + 1
        return counts

    # -- listing ------------------------------------------------------------

    def list_metrics(
        self,
        family: str | None = None,
        category: str | None = None,
        origin: str | None = None,
    ) -> list[MetricSummary]:
        """Deterministic listing: model-based first, then category order, then name."""

        if category is not None and category not in RUBRIC_CATEGORIES + MODEL_CATEGORIES:
            raise UnknownCategory(f"unknown category {category!r}")

        def sort_key(spec: MetricSpec) -> tuple:
            if isinstance(spec, ModelMetricSpec):
                cat_rank = MODEL_CATEGORIES.index(spec.category) if spec.category in MODEL_CATEGORIES else len(MODEL_CATEGORIES)
                return (0, cat_rank, spec.name, spec.id)
            return (1, RUBRIC_CATEGORIES.index(spec.category), spec.name, spec.id)

        out: list[MetricSummary] = []
        for spec in sorted(self._metrics.values(), key=sort_key):
            if family is not None and spec.family != family:
                continue
            if category is not None and spec.category != category:
                continue
            spec_origin = spec.origin if isinstance(spec, RubricSpec) else "builtin"
            if origin is not None and spec_origin != origin:
                continue
            out.append(
                MetricSummary(
                    id=spec.id,
                    name=spec.name,
                    family=spec.family,
                    category=spec.category,
                    origin=spec_origin,
                )
            )
        return out

    # -- custom metrics -----------------------------------------------------

    def register_custom(self, spec: RubricSpec) -> str:
        """Register a validated custom rubric and persist it to the custom store."""

        if spec.origin != "custom":
            raise SchemaViolation("register_custom requires origin='custom'")
        violations = validate_rubric(spec)
        if violations:
            raise SchemaViolation(
                f"custom rubric {spec.id!r} failed validation", violations=violations
            )
        with self._write_lock:
            if spec.id in self._metrics:
                raise DuplicateMetricId(f"metric id {spec.id!r} already registered")
            if spec.version < 1:
                spec = replace(spec, version=1)
            self._metrics[spec.id] = spec
            if self._custom_store is not None:
                self._save_custom_store()
        return spec.id

    def _save_custom_store(self) -> None:
        assert self._custom_store is not None
        customs = [
            rubric_to_dict(m)
            for m in sorted(self.rubrics, key=lambda r: r.id)
            if m.origin == "custom"
        ]
        self._custom_store.parent.mkdir(parents=True, exist_ok=True)
        tmp = self._custom_store.with_suffix(".tmp")
        tmp.write_text(json.dumps({"metrics": customs}, indent=2, ensure_ascii=False) + "\n")
        tmp.replace(self._custom_store)


def default_data_dir() -> Path:
    return Path(str(resources.files("dialogue_audit").joinpath("data")))


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_library(data_dir: Path | None = None, custom_store: Path | None = None) -> Registry:
    """Load the shipped metric library (69 rubrics + 12 model metrics).

    Per-file checksums and counts are pinned in ``library/manifest.json`` so
    accidental edits surface as :class:`CountMismatch` instead of silent
    drift. Custom metrics from ``custom_store`` are loaded on top.
    """

    root = Path(data_dir) if data_dir is not None else default_data_dir()
    library_dir = root / "library"
    manifest_path = library_dir / "manifest.json"
    if not manifest_path.exists():
        raise CountMismatch(f"library manifest not found at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())

    registry = Registry(custom_store=custom_store)

    total = 0
    for entry in manifest.get("files", []):
        path = library_dir / entry["name"]
        if not path.exists():
            raise CountMismatch(f"library file {entry['name']} listed in manifest is missing")
        if _sha256_file(path) != entry["sha256"]:
            raise CountMismatch(
                f"library file {entry['name']} does not match its manifest checksum; "
                f"rerun tools/update_manifest.py after intentional edits"
            )
        docs = json.loads(path.read_text())
        if len(docs) != entry["metric_count"]:
            raise CountMismatch(
                f"library file {entry['name']} holds {len(docs)} metrics, "
                f"manifest expects {entry['metric_count']}"
            )
        for doc in docs:
            spec = rubric_from_dict(doc, default_origin="literature")
            violations = validate_rubric(spec)
            if violations:
                raise SchemaViolation(
                    f"shipped rubric {spec.id!r} failed validation", violations=violations
                )
            registry._add(spec)
            total += 1

    if total != manifest.get("total_metrics"):
        raise CountMismatch(
            f"library holds {total} metrics, manifest expects {manifest.get('total_metrics')}"
        )
    if total != 69:
        raise CountMismatch(f"library must hold 69 literature-derived rubrics, found {total}")

    counts = registry.category_counts()
    for cat, expected in RUBRIC_CATEGORY_COUNTS.items():
        if counts.get(cat, 0) != expected:
            raise CountMismatch(
                f"category {cat!r} holds {counts.get(cat, 0)} metrics, expected {expected}"
            )

    model_path = root / "model_metrics.json"
    model_docs = json.loads(model_path.read_text())
    for doc in model_docs:
        registry._add(model_metric_from_dict(doc))
    if len(registry.model_metrics) != 12:
        raise CountMismatch(
            f"expected 12 model-based metrics, found {len(registry.model_metrics)}"
        )

    if custom_store is not None and custom_store.exists():
        store = json.loads(custom_store.read_text())
        for doc in store.get("metrics", []):
            spec = rubric_from_dict(doc, default_origin="custom")
            violations = validate_rubric(spec)
            if violations:
                raise SchemaViolation(
                    f"stored custom rubric {spec.id!r} failed validation",
                    violations=violations,
                )
            registry._add(spec)

    logger.debug(
        "registry loaded: %d literature rubrics, %d model metrics, %d custom",
        total, len(registry.model_metrics), len(registry.rubrics) - total,
    )
    return registry
