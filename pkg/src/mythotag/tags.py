"""Conversion between inline ``<mythEntity>`` markup and stand-off annotations.

The inline format is the wire format coming back from the model. Parsing
is flat: tags never nest, and a nested opening tag is an error rather
than something we silently repair, so the pipeline can route the passage
to human review instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import MythotagError
from .schema import Annotation, EntityType, parse_entity_type, UnknownType


class ParseMode(Enum):
    STRICT = "strict"
    LENIENT = "lenient"


OPEN_MARKER = "<mythEntity"
CLOSE_TAG = "</mythEntity>"

# Canonical grammar: one ASCII space, ASCII double quotes, canonical label.
_STRICT_OPEN = re.compile(r'<mythEntity type="([a-z_]+)">')
# Raw model output: arbitrary whitespace, typographic quotes, escaped underscores.
_LENIENT_OPEN = re.compile(
    r'<mythEntity\s+type\s*=\s*["“”«»\']?\s*([A-Za-z\\_ -]*?)\s*["“”«»\']?\s*>'
)
_LENIENT_CLOSE = re.compile(r"</\s*mythEntity\s*>")


class TagParseError(MythotagError):
    """Base class for inline markup parse failures."""


class UnclosedTag(TagParseError):
    pass


class NestedTag(TagParseError):
    pass


class MalformedAttribute(TagParseError):
    pass


class UnmatchedClosingTag(TagParseError):
    pass


class EmptyTagBody(TagParseError):
    pass


class InvalidPassage(MythotagError):
    """A ParsedPassage violates its own invariants and cannot be rendered."""


@dataclass(frozen=True)
class ParsedPassage:
    """Plain text plus annotations with offsets into that plain text."""

    plain_text: str
    annotations: tuple[Annotation, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))
        object.__setattr__(self, "warnings", tuple(self.warnings))


def _match_open(tagged: str, pos: int, mode: ParseMode):
    """Try to read an opening tag at ``pos``; returns (label, end_pos) or raises."""
    if mode is ParseMode.STRICT:
        m = _STRICT_OPEN.match(tagged, pos)
        if m is None:
            raise MalformedAttribute(
                f"malformed opening tag at offset {pos}: {tagged[pos:pos + 40]!r}"
            )
        return m.group(1), m.end()
    m = _LENIENT_OPEN.match(tagged, pos)
    if m is None or not m.group(1):
        raise MalformedAttribute(
            f"malformed opening tag at offset {pos}: {tagged[pos:pos + 40]!r}"
        )
    return m.group(1), m.end()


def parse_inline(tagged_text: str, mode: ParseMode = ParseMode.STRICT) -> ParsedPassage:
    """Convert inline markup to plain text plus stand-off annotations.

    Offsets are code points into the returned plain text; annotation order
    follows textual order. A ``<`` that does not begin mythEntity markup is
    treated as literal text. In lenient mode, tags carrying an unknown type
    (and stray closing tags) are stripped and recorded as warnings instead
    of failing the whole passage.
    """
    plain: list[str] = []
    plain_len = 0
    annotations: list[Annotation] = []
    warnings: list[str] = []
    open_start: int | None = None  # plain-text offset where the current tag opened
    open_label: EntityType | None = None
    open_discard = False

    pos = 0
    n = len(tagged_text)
    while pos < n:
        next_open = tagged_text.find(OPEN_MARKER, pos)
        if mode is ParseMode.STRICT:
            next_close = tagged_text.find(CLOSE_TAG, pos)
            close_len = len(CLOSE_TAG)
        else:
            m_close = _LENIENT_CLOSE.search(tagged_text, pos)
            next_close = m_close.start() if m_close else -1
            close_len = (m_close.end() - m_close.start()) if m_close else 0
        candidates = [c for c in (next_open, next_close) if c != -1]
        if not candidates:
            chunk = tagged_text[pos:]
            plain.append(chunk)
            plain_len += len(chunk)
            break
        nxt = min(candidates)
        chunk = tagged_text[pos:nxt]
        plain.append(chunk)
        plain_len += len(chunk)

        if next_close != -1 and nxt == next_close:
            # closing tag
            if open_start is None:
                if mode is ParseMode.STRICT:
                    raise UnmatchedClosingTag(f"closing tag at offset {nxt} with no open tag")
                warnings.append(f"stray closing tag at offset {nxt} stripped")
                pos = nxt + close_len
                continue
            if plain_len == open_start:
                if mode is ParseMode.STRICT:
                    raise EmptyTagBody(f"tag closed at offset {nxt} with empty content")
                warnings.append(f"empty tag at offset {nxt} stripped")
            elif not open_discard:
                surface = "".join(plain)[open_start:plain_len]
                annotations.append(
                    Annotation(
                        start=open_start,
                        end=plain_len,
                        entity_type=open_label,
                        surface=surface,
                    )
                )
            open_start = None
            open_label = None
            open_discard = False
            pos = nxt + close_len
            continue

        # opening tag
        if open_start is not None:
            raise NestedTag(f"tag opened at offset {nxt} inside an open tag")
        label, after = _match_open(tagged_text, nxt, mode)
        try:
            entity_type = parse_entity_type(label)
            discard = False
        except UnknownType:
            if mode is ParseMode.STRICT:
                raise
            warnings.append(f"unknown type {label!r} at offset {nxt}: tag stripped")
            entity_type = None
            discard = True
        open_start = plain_len
        open_label = entity_type
        open_discard = discard
        pos = after

    if open_start is not None:
        raise UnclosedTag(f"opening tag at plain offset {open_start} never closed")

    return ParsedPassage("".join(plain), tuple(annotations), tuple(warnings))


def _check_passage(passage: ParsedPassage) -> None:
    text = passage.plain_text
    if "<" in text:
        raise InvalidPassage("plain text contains '<', which cannot round-trip")
    prev_end = 0
    prev_start = -1
    for ann in passage.annotations:
        if not (0 <= ann.start < ann.end <= len(text)):
            raise InvalidPassage(f"span [{ann.start}, {ann.end}) out of bounds")
        if ann.start <= prev_start or ann.start < prev_end:
            raise InvalidPassage("annotations unsorted or overlapping")
        if text[ann.start : ann.end] != ann.surface:
            raise InvalidPassage(
                f"surface {ann.surface!r} != slice {text[ann.start:ann.end]!r}"
            )
        prev_start, prev_end = ann.start, ann.end


def render_inline(passage: ParsedPassage) -> str:
    """Emit the canonical inline markup for a passage.

    Output uses ASCII double quotes and canonical type labels, so parsing
    it back in strict mode reproduces the passage exactly.
    """
    _check_passage(passage)
    out: list[str] = []
    cursor = 0
    text = passage.plain_text
    for ann in passage.annotations:
        out.append(text[cursor : ann.start])
        out.append(f'<mythEntity type="{ann.entity_type.value}">')
        out.append(text[ann.start : ann.end])
        out.append(CLOSE_TAG)
        cursor = ann.end
    out.append(text[cursor:])
    return "".join(out)
