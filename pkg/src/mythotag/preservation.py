"""Detection and localization of model-side text alterations.

The model is supposed to echo the passage verbatim apart from the tags it
inserts. This module aligns the original passage with the model's plain
text, localizes every difference as a hunk, and decides which annotations
can still be trusted (those sitting entirely inside unaltered regions).
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from enum import Enum

from .errors import MythotagError
from .schema import Annotation


class PreservationStatus(Enum):
    IDENTICAL = "identical"
    ALTERED = "altered"


class AlterationKind(Enum):
    INSERTION = "insertion"
    DELETION = "deletion"
    SUBSTITUTION = "substitution"


@dataclass(frozen=True)
class Alteration:
    kind: AlterationKind
    orig_start: int
    orig_end: int
    new_start: int
    new_end: int
    orig_text: str
    new_text: str


@dataclass(frozen=True)
class PreservationVerdict:
    status: PreservationStatus
    alterations: tuple[Alteration, ...]
    edit_ratio: float

    def __post_init__(self):
        object.__setattr__(self, "alterations", tuple(self.alterations))


class InconsistentInput(MythotagError):
    """Annotation offsets do not fit the model text the verdict was built from."""


def levenshtein(a: str, b: str) -> int:
    """Exact code-point edit distance (unit costs)."""
    if a == b:
        return 0
    # strip common affixes before the quadratic part
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) < len(a):
        a, b = b, a
    prev = list(range(len(a) + 1))
    for j, cb in enumerate(b, start=1):
        cur = [j] + [0] * len(a)
        for i, ca in enumerate(a, start=1):
            cur[i] = min(
                prev[i] + 1,
                cur[i - 1] + 1,
                prev[i - 1] + (ca != cb),
            )
        prev = cur
    return prev[-1]


def _wordy(c: str) -> bool:
    return not c.isspace()


def _slide(hunks, original, model):
    """Shift pure insertions/deletions so they start at a word boundary.

    A hunk bordered by equal text can often be placed at several equivalent
    positions; we prefer the rightmost placement whose start falls just after
    whitespace (or at the string start), falling back to the rightmost one.
    """
    out = []
    for idx, (i1, i2, j1, j2) in enumerate(hunks):
        insert = i1 == i2 and j1 < j2
        delete = j1 == j2 and i1 < i2
        if not insert and not delete:
            out.append((i1, i2, j1, j2))
            continue
        limit_i = hunks[idx + 1][0] if idx + 1 < len(hunks) else len(original)
        limit_j = hunks[idx + 1][2] if idx + 1 < len(hunks) else len(model)
        shifts = [0]
        s = 0
        while True:
            ni1, nj1 = i1 + s, j1 + s
            ni2, nj2 = i2 + s, j2 + s
            if insert:
                if ni1 >= limit_i or nj2 >= limit_j or nj2 >= len(model):
                    break
                if original[ni1] != model[nj1]:
                    break
            else:
                if ni2 >= limit_i or nj1 >= limit_j or ni2 >= len(original):
                    break
                if original[ni1] != model[nj1]:
                    break
            s += 1
            shifts.append(s)
        def at_boundary(shift: int) -> bool:
            p = j1 + shift
            return p == 0 or model[p - 1].isspace()
        boundary = [s for s in shifts if at_boundary(s)]
        best = max(boundary) if boundary else max(shifts)
        out.append((i1 + best, i2 + best, j1 + best, j2 + best))
    return out


def _expand_to_words(hunks, original, model):
    """Widen hunk edges that cut through a word, for readable reports."""
    out = []
    for idx, (i1, i2, j1, j2) in enumerate(hunks):
        floor_i = hunks[idx - 1][1] if idx > 0 else 0
        ceil_i = hunks[idx + 1][0] if idx + 1 < len(hunks) else len(original)
        first = (original[i1] if i1 < i2 else (model[j1] if j1 < j2 else ""))
        prev = original[i1 - 1] if i1 > 0 else ""
        if first and prev and _wordy(first) and _wordy(prev):
            while i1 > floor_i and _wordy(original[i1 - 1]):
                i1 -= 1
                j1 -= 1
        last = (original[i2 - 1] if i1 < i2 else (model[j2 - 1] if j1 < j2 else ""))
        nxt = original[i2] if i2 < len(original) else ""
        if last and nxt and _wordy(last) and _wordy(nxt):
            while i2 < ceil_i and i2 < len(original) and _wordy(original[i2]):
                i2 += 1
                j2 += 1
        out.append((i1, i2, j1, j2))
    return out


def _merge(hunks):
    if not hunks:
        return []
    hunks = sorted(hunks)
    merged = [hunks[0]]
    for i1, i2, j1, j2 in hunks[1:]:
        li1, li2, lj1, lj2 = merged[-1]
        if i1 <= li2:
            merged[-1] = (li1, max(li2, i2), lj1, max(lj2, j2))
        else:
            merged.append((i1, i2, j1, j2))
    return merged


def check_preservation(original: str, model_plain: str) -> PreservationVerdict:
    """Align the two texts and report every alteration as a hunk.

    Hunks come from a character-level LCS alignment, then get slid and
    widened to word boundaries so reports read naturally. The edit ratio
    stays at code-point granularity: levenshtein / max(len, len, 1).
    """
    if original == model_plain:
        return PreservationVerdict(PreservationStatus.IDENTICAL, (), 0.0)
    matcher = difflib.SequenceMatcher(None, original, model_plain, autojunk=False)
    raw = [
        (i1, i2, j1, j2)
        for op, i1, i2, j1, j2 in matcher.get_opcodes()
        if op != "equal"
    ]
    hunks = _slide(raw, original, model_plain)
    hunks = _expand_to_words(hunks, original, model_plain)
    hunks = _merge(hunks)
    alterations = []
    for i1, i2, j1, j2 in hunks:
        orig_text = original[i1:i2]
        new_text = model_plain[j1:j2]
        if not orig_text:
            kind = AlterationKind.INSERTION
        elif not new_text:
            kind = AlterationKind.DELETION
        else:
            kind = AlterationKind.SUBSTITUTION
        alterations.append(Alteration(kind, i1, i2, j1, j2, orig_text, new_text))
    ratio = levenshtein(original, model_plain) / max(len(original), len(model_plain), 1)
    return PreservationVerdict(PreservationStatus.ALTERED, tuple(alterations), ratio)


def apply_alterations(original: str, alterations) -> str:
    """Replay hunks against the original; reconstructs the model text."""
    out = []
    cursor = 0
    for alt in alterations:
        out.append(original[cursor : alt.orig_start])
        out.append(alt.new_text)
        cursor = alt.orig_end
    out.append(original[cursor:])
    return "".join(out)


def remap_annotations(
    annotations,
    verdict: PreservationVerdict,
    original: str,
    max_ratio: float = 0.05,
) -> tuple[list[Annotation], list[Annotation]]:
    """Carry annotations from the model's text back onto the original.

    An annotation survives only if its whole span sits inside one aligned
    (unaltered) region; everything else is handed back as unmappable. When
    the texts diverged beyond ``max_ratio`` nothing is trusted at all.
    """
    model_len = len(original) + sum(
        (a.new_end - a.new_start) - (a.orig_end - a.orig_start)
        for a in verdict.alterations
    )
    for ann in annotations:
        if not (0 <= ann.start < ann.end <= model_len):
            raise InconsistentInput(
                f"annotation span [{ann.start}, {ann.end}) outside model text "
                f"of length {model_len}"
            )
    if verdict.edit_ratio > max_ratio:
        return [], list(annotations)

    # aligned segments as (new_lo, new_hi, shift-to-original)
    segments = []
    orig_pos = 0
    new_pos = 0
    for alt in verdict.alterations:
        if alt.new_start > new_pos:
            segments.append((new_pos, alt.new_start, orig_pos - new_pos))
        orig_pos = alt.orig_end
        new_pos = alt.new_end
    if new_pos < model_len:
        segments.append((new_pos, model_len, orig_pos - new_pos))

    remapped: list[Annotation] = []
    unmappable: list[Annotation] = []
    for ann in annotations:
        target = None
        for lo, hi, shift in segments:
            if lo <= ann.start and ann.end <= hi:
                target = Annotation(
                    ann.start + shift, ann.end + shift, ann.entity_type, ann.surface
                )
                break
        if target is None or original[target.start : target.end] != target.surface:
            unmappable.append(ann)
        else:
            remapped.append(target)
    return remapped, unmappable
