"""Tagset and stand-off annotation data model.

Annotations are stored apart from the text as code-point offset ranges,
so the source text is never touched. Offsets are Unicode code points
(Python string indices), not bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .errors import MythotagError


class EntityType(Enum):
    """The closed ten-way tagset for mythological references."""

    DEITY = "deity"
    HERO = "hero"
    CREATURE = "creature"
    HALF_CREATURE = "half_creature"
    CREATURE_GROUP = "creature_group"
    MONSTERS = "monsters"
    LOCATION = "location"
    EVENT = "event"
    OBJECT = "object"
    CONCEPT = "concept"

    def __str__(self) -> str:
        return self.value


_CANONICAL = {t.value: t for t in EntityType}


class UnknownType(MythotagError):
    """Raised when a label is not one of the ten canonical entity types."""

    def __init__(self, label: str):
        self.label = label
        super().__init__(f"unknown entity type: {label!r}")


def parse_entity_type(label: str) -> EntityType:
    """Normalize a textual label to its canonical EntityType.

    Trims whitespace, ignores case, and accepts the escaped-underscore
    variant (``half\\_creature``) that shows up in raw prompt templates.
    """
    normalized = label.strip().replace("\\_", "_").lower()
    try:
        return _CANONICAL[normalized]
    except KeyError:
        raise UnknownType(label) from None


@dataclass(frozen=True)
class Annotation:
    """A stand-off span: [start, end) code-point offsets into a document text."""

    start: int
    end: int
    entity_type: EntityType
    surface: str

    def overlaps(self, other: "Annotation") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Provenance:
    """Where an annotation set came from."""

    model: str
    prompt_digest: str
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class AnnotatedDocument:
    """An immutable text plus its annotations, sorted by start offset."""

    doc_id: str
    text: str
    annotations: tuple[Annotation, ...] = ()
    provenance: Optional[Provenance] = None

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))

    @property
    def text_sha256(self) -> str:
        return text_digest(self.text)


@dataclass(frozen=True)
class Violation:
    kind: str  # offset_out_of_bounds | surface_mismatch | overlap | unsorted
    index: int
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "violations", tuple(self.violations))

    @property
    def ok(self) -> bool:
        return not self.violations


def text_digest(text: str) -> str:
    """Hex SHA-256 of the UTF-8 encoding of ``text``."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def validate_document(doc: AnnotatedDocument) -> ValidationReport:
    """Check every document invariant; violations are data, not failures.

    The report is empty exactly when offsets are in bounds, surfaces match
    the text slices, spans are pairwise non-overlapping, and annotations
    are sorted strictly ascending by start.
    """
    violations: list[Violation] = []
    n = len(doc.text)
    for i, ann in enumerate(doc.annotations):
        if not (0 <= ann.start < ann.end <= n):
            violations.append(
                Violation(
                    "offset_out_of_bounds",
                    i,
                    f"span [{ann.start}, {ann.end}) outside text of length {n}",
                )
            )
            continue
        slice_ = doc.text[ann.start : ann.end]
        if slice_ != ann.surface:
            violations.append(
                Violation(
                    "surface_mismatch",
                    i,
                    f"surface {ann.surface!r} != text slice {slice_!r}",
                )
            )
    for i in range(1, len(doc.annotations)):
        if doc.annotations[i - 1].start >= doc.annotations[i].start:
            violations.append(
                Violation(
                    "unsorted",
                    i,
                    f"start {doc.annotations[i].start} does not increase past "
                    f"{doc.annotations[i - 1].start}",
                )
            )
    by_start = sorted(range(len(doc.annotations)), key=lambda i: (doc.annotations[i].start, i))
    max_end = None
    max_idx = -1
    for i in by_start:
        ann = doc.annotations[i]
        if max_end is not None and ann.start < max_end:
            prev = doc.annotations[max_idx]
            violations.append(
                Violation(
                    "overlap",
                    i,
                    f"span [{ann.start}, {ann.end}) overlaps "
                    f"[{prev.start}, {prev.end})",
                )
            )
        if max_end is None or ann.end > max_end:
            max_end = ann.end
            max_idx = i
    violations.sort(key=lambda v: (v.index, v.kind))
    return ValidationReport(tuple(violations))


class DigestMismatch(MythotagError):
    """A stand-off file does not match the text it claims to annotate."""


def annotations_to_json(doc: AnnotatedDocument) -> str:
    """Serialize to the stand-off interchange format (stable bytes)."""
    payload: dict = {
        "doc_id": doc.doc_id,
        "text_sha256": doc.text_sha256,
        "annotations": [
            {
                "start": a.start,
                "end": a.end,
                "type": a.entity_type.value,
                "surface": a.surface,
            }
            for a in doc.annotations
        ],
    }
    if doc.provenance is not None:
        prov = {"model": doc.provenance.model, "prompt_digest": doc.provenance.prompt_digest}
        if doc.provenance.timestamp is not None:
            prov["timestamp"] = doc.provenance.timestamp
        payload["provenance"] = prov
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def annotations_from_json(raw: str, text: str) -> AnnotatedDocument:
    """Parse a stand-off file and verify it against its text.

    Refuses files whose recorded digest does not match ``text``.
    """
    data = json.loads(raw)
    digest = text_digest(text)
    if data["text_sha256"] != digest:
        raise DigestMismatch(
            f"annotation file digest {data['text_sha256']} does not match text digest {digest}"
        )
    annotations = tuple(
        Annotation(
            start=item["start"],
            end=item["end"],
            entity_type=parse_entity_type(item["type"]),
            surface=item["surface"],
        )
        for item in data["annotations"]
    )
    provenance = None
    if "provenance" in data:
        p = data["provenance"]
        provenance = Provenance(
            model=p["model"],
            prompt_digest=p["prompt_digest"],
            timestamp=p.get("timestamp"),
        )
    return AnnotatedDocument(
        doc_id=data["doc_id"], text=text, annotations=annotations, provenance=provenance
    )


def save_annotations(doc: AnnotatedDocument, path: Path) -> None:
    path.write_text(annotations_to_json(doc), encoding="utf-8")


def load_annotations(path: Path, text: str) -> AnnotatedDocument:
    return annotations_from_json(path.read_text(encoding="utf-8"), text)
