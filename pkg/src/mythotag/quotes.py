"""Grounding of claimed quotations against an indexed corpus.

Every queried quote is classified as exact (verbatim occurrence), near
(within a normalized edit-distance threshold), or not found. Matching is
defined over normalized text: the minimum over all corpus substrings w of
levenshtein(quote, w) / max(len(quote), len(w)). The index answers that
question exactly: n-gram seeding only narrows where to look, and the
q-gram counting bound tells us when unseeded regions provably cannot
contain a qualifying or better window, so no heuristic miss is possible.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor

import numpy as np

from .errors import MythotagError

_QUOTE_MAP = {
    "’": "'",  # typographic apostrophes
    "‘": "'",
    "“": '"',  # curly double quotes
    "”": '"',
    "„": '"',
    "«": '"',  # guillemets
    "»": '"',
}


@dataclass(frozen=True)
class NormalizationConfig:
    unicode_nfc: bool = True
    casefold: bool = True
    collapse_whitespace: bool = True
    unify_quotes: bool = True


DEFAULT_CONFIG = NormalizationConfig()


class OffsetMap:
    """Translates normalized spans back to original code-point spans."""

    __slots__ = ("starts", "ends")

    def __init__(self, starts: np.ndarray, ends: np.ndarray):
        self.starts = starts
        self.ends = ends

    def to_original(self, norm_start: int, norm_end: int) -> tuple[int, int]:
        if norm_start >= norm_end:
            raise ValueError("empty normalized span")
        return int(self.starts[norm_start]), int(self.ends[norm_end - 1])


def normalize(text: str, config: NormalizationConfig = DEFAULT_CONFIG) -> tuple[str, OffsetMap]:
    """Apply the configured normalization, keeping an offset map.

    Idempotent under a fixed config. Accents are preserved: French accents
    are meaningful, so only casefolding is applied to letters.
    """
    triples: list[tuple[str, int, int]] = []  # (char, orig_lo, orig_hi)
    i = 0
    n = len(text)
    while i < n:
        j = i + 1
        if config.unicode_nfc:
            while j < n and unicodedata.combining(text[j]):
                j += 1
            unit = unicodedata.normalize("NFC", text[i:j])
        else:
            unit = text[i:j]
        for c in unit:
            if config.unify_quotes:
                c = _QUOTE_MAP.get(c, c)
            if config.casefold:
                for cc in c.casefold():
                    triples.append((cc, i, j))
            else:
                triples.append((c, i, j))
        i = j

    if config.collapse_whitespace:
        collapsed: list[tuple[str, int, int]] = []
        k = 0
        while k < len(triples):
            c, lo, hi = triples[k]
            if c.isspace():
                end = k
                while end + 1 < len(triples) and triples[end + 1][0].isspace():
                    end += 1
                collapsed.append((" ", lo, triples[end][2]))
                k = end + 1
            else:
                collapsed.append((c, lo, hi))
                k += 1
        triples = collapsed

    normalized = "".join(t[0] for t in triples)
    starts = np.fromiter((t[1] for t in triples), dtype=np.int64, count=len(triples))
    ends = np.fromiter((t[2] for t in triples), dtype=np.int64, count=len(triples))
    return normalized, OffsetMap(starts, ends)


def _codepoints(s: str) -> np.ndarray:
    if not s:
        return np.empty(0, dtype=np.int32)
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.uint32).astype(np.int32)


class DuplicateDocId(MythotagError):
    pass


class EmptyQuote(MythotagError):
    pass


GRAM_SIZES = (6, 3)  # primary seeding size first, completeness net second


@dataclass
class _Doc:
    text: str
    norm: str
    offsets: OffsetMap
    codes: np.ndarray
    postings: dict[int, dict[str, np.ndarray]]


class CorpusIndex:
    """Immutable after build; safe for concurrent readers."""

    def __init__(self, config: NormalizationConfig):
        self.config = config
        self._docs: dict[str, _Doc] = {}

    @property
    def doc_ids(self) -> list[str]:
        return sorted(self._docs)

    @property
    def documents(self) -> dict[str, str]:
        return {doc_id: d.text for doc_id, d in self._docs.items()}

    def _add(self, doc_id: str, text: str) -> None:
        if doc_id in self._docs:
            raise DuplicateDocId(doc_id)
        if not text:
            raise ValueError(f"document {doc_id!r} is empty")
        norm, offsets = normalize(text, self.config)
        postings: dict[int, dict[str, np.ndarray]] = {}
        for size in GRAM_SIZES:
            table: dict[str, list[int]] = {}
            for i in range(len(norm) - size + 1):
                table.setdefault(norm[i : i + size], []).append(i)
            postings[size] = {
                gram: np.asarray(pos, dtype=np.int64) for gram, pos in table.items()
            }
        self._docs[doc_id] = _Doc(text, norm, offsets, _codepoints(norm), postings)


def build_index(corpus, config: NormalizationConfig = DEFAULT_CONFIG) -> CorpusIndex:
    """Index a corpus given as a mapping or iterable of (doc_id, text)."""
    index = CorpusIndex(config)
    items = corpus.items() if hasattr(corpus, "items") else corpus
    for doc_id, text in items:
        index._add(doc_id, text)
    return index


class QuoteStatus:
    EXACT = "exact"
    NEAR = "near"
    NOT_FOUND = "not_found"


@dataclass(frozen=True)
class QuoteMatch:
    doc_id: str
    start: int  # original code-point offsets
    end: int
    normalized_distance: float


@dataclass(frozen=True)
class QuoteVerdict:
    status: str
    matches: tuple[QuoteMatch, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "matches", tuple(self.matches))

    @property
    def best_distance(self):
        return min((m.normalized_distance for m in self.matches), default=None)


def _sellers_last_row(codes: np.ndarray, q_codes: np.ndarray) -> np.ndarray:
    """Minimum raw edit distance of the quote versus any window ending at
    each position of ``codes`` (free start). Entry j covers windows ending
    just before index j; length len(codes)+1."""
    n = len(codes)
    m = len(q_codes)
    row = np.zeros(n + 1, dtype=np.int32)
    offsets = np.arange(n + 1, dtype=np.int32)
    for i in range(1, m + 1):
        diag = row[:-1] + (codes != q_codes[i - 1])
        up = row[1:] + 1
        a = np.minimum(diag, up)
        stairs = np.empty(n + 1, dtype=np.int32)
        stairs[0] = i
        stairs[1:] = a - offsets[1:]
        row = np.minimum.accumulate(stairs) + offsets
    return row


def _window_distances(
    codes: np.ndarray,
    s_lo: int,
    s_hi: int,
    q_codes: np.ndarray,
    l_lo: int,
    l_hi: int,
):
    """Exact edit distances of the quote to every window T[s:s+l] with
    s in [s_lo, s_hi) and l in [l_lo, l_hi]. Yields per-length minima as
    (raw, length, absolute_start) candidates."""
    n = len(codes)
    width = s_hi - s_lo
    if width <= 0:
        return []
    m = len(q_codes)
    seg = np.full(width + l_hi, -1, dtype=np.int32)
    avail = min(n - s_lo, width + l_hi)
    if avail > 0:
        seg[:avail] = codes[s_lo : s_lo + avail]
    prev = np.tile(np.arange(l_hi + 1, dtype=np.int32)[:, None], (1, width))
    cur = np.empty_like(prev)
    for i in range(1, m + 1):
        qc = q_codes[i - 1]
        cur[0, :] = i
        for l in range(1, l_hi + 1):
            neq = (seg[l - 1 : l - 1 + width] != qc).astype(np.int32)
            np.minimum(prev[l] + 1, cur[l - 1] + 1, out=cur[l])
            np.minimum(cur[l], prev[l - 1] + neq, out=cur[l])
        prev, cur = cur, prev
    starts_abs = np.arange(s_lo, s_hi, dtype=np.int64)
    results = []
    big = np.int32(2**30)
    for l in range(l_lo, l_hi + 1):
        vals = prev[l].copy()
        vals[starts_abs + l > n] = big
        best = int(vals.min(initial=big))
        if best >= big:
            continue
        for idx in np.flatnonzero(vals == best)[:16]:
            results.append((best, l, int(starts_abs[idx])))
    return results


def _group_positions(positions: np.ndarray, gap: int) -> list[tuple[int, int]]:
    """Group sorted positions into (first, last) runs; a new run starts when
    consecutive positions are more than ``gap`` apart."""
    if len(positions) == 0:
        return []
    breaks = np.flatnonzero(np.diff(positions) > gap)
    firsts = positions[np.r_[0, breaks + 1]]
    lasts = positions[np.r_[breaks, len(positions) - 1]]
    return [(int(a), int(b)) for a, b in zip(firsts, lasts)]


def _gram_regions(doc: _Doc, qn: str, size: int, d_max: int, l_hi: int) -> list[tuple[int, int]]:
    """Text regions that could contain a window sharing an aligned, unedited
    ``size``-gram with the quote (alignment drift bounded by d_max)."""
    table = doc.postings[size]
    estimates = []
    for p in range(len(qn) - size + 1):
        arr = table.get(qn[p : p + size])
        if arr is not None and len(arr):
            estimates.append(arr - p)
    if not estimates:
        return []
    est = np.unique(np.concatenate(estimates))
    n = len(doc.norm)
    return [
        (max(0, lo - d_max), min(n, hi + d_max + l_hi))
        for lo, hi in _group_positions(est, 2 * d_max + 32)
    ]


def _best_in_regions(doc: _Doc, regions, q_codes, d_max: int, l_lo: int, l_hi: int):
    """Exact best windows inside the given regions of one document."""
    n = len(doc.codes)
    m = len(q_codes)
    candidates = []
    for a, b in regions:
        a = max(0, a)
        b = min(n, b)
        if b - a < l_lo:
            continue
        last = _sellers_last_row(doc.codes[a:b], q_codes)
        promising = np.flatnonzero(last <= d_max)
        if len(promising) == 0:
            continue
        for ja, jb in _group_positions(promising, l_hi):
            s_lo = max(a, a + ja - l_hi)
            s_hi = min(b - l_lo + 1, a + jb + 1)
            for raw, length, start in _window_distances(
                doc.codes, s_lo, s_hi, q_codes, l_lo, l_hi
            ):
                if raw <= d_max:
                    candidates.append((raw, length, start))
    return candidates


def verify_quote(index: CorpusIndex, quote: str, threshold: float = 0.2) -> QuoteVerdict:
    """Classify a quote against the corpus.

    Leading/trailing whitespace of the normalized quote is ignored. The
    reported normalized distance is levenshtein / max(quote length, window
    length), measured over normalized text; offsets in matches are original
    code-point coordinates.
    """
    if not (0 <= threshold < 1):
        raise ValueError("threshold must be in [0, 1)")
    qn, _ = normalize(quote, index.config)
    qn = qn.strip(" ")
    if not qn:
        raise EmptyQuote("quote is empty after normalization")
    m = len(qn)
    t_frac = Fraction(threshold)

    exact: list[QuoteMatch] = []
    for doc_id in index.doc_ids:
        doc = index._docs[doc_id]
        at = doc.norm.find(qn)
        while at != -1:
            start, end = doc.offsets.to_original(at, at + m)
            exact.append(QuoteMatch(doc_id, start, end, 0.0))
            at = doc.norm.find(qn, at + 1)
    if exact:
        return QuoteVerdict(QuoteStatus.EXACT, tuple(exact))

    d_max = floor(threshold * m / (1 - threshold))
    if d_max < 1:
        return QuoteVerdict(QuoteStatus.NOT_FOUND)
    l_lo = max(1, m - d_max)
    l_hi = m + d_max

    q_codes = _codepoints(qn)
    u3 = ceil((m - 2) / 3) if m >= 3 else 0
    counting_net_holds = m >= 3 and Fraction(u3, m + u3) > t_frac

    best: tuple[Fraction, list] | None = None  # (fraction, [(doc, start, end, raw, denom)])

    def consider(doc_id: str, cands):
        nonlocal best
        for raw, length, start in cands:
            frac = Fraction(raw, max(m, length))
            if frac > t_frac:
                continue
            entry = (doc_id, start, start + length, raw, max(m, length))
            if best is None or frac < best[0]:
                best = (frac, [entry])
            elif frac == best[0] and entry not in best[1]:
                best[1].append(entry)

    if not counting_net_holds:
        # quotes too short for the counting bound: scan everything, exactly
        for doc_id in index.doc_ids:
            doc = index._docs[doc_id]
            cands = _best_in_regions(
                doc, [(0, len(doc.codes))], q_codes, d_max, l_lo, l_hi
            )
            consider(doc_id, cands)
    else:
        for size in GRAM_SIZES:
            if m < size:
                continue
            for doc_id in index.doc_ids:
                doc = index._docs[doc_id]
                regions = _gram_regions(doc, qn, size, d_max, l_hi)
                cands = _best_in_regions(doc, regions, q_codes, d_max, l_lo, l_hi)
                consider(doc_id, cands)
            # windows without any aligned unedited gram of this size sit at
            # raw distance >= u, hence normalized >= u / (m + u)
            u = ceil((m - size + 1) / size)
            unseeded_floor = Fraction(u, m + u)
            if best is not None and best[0] < unseeded_floor:
                break
            if best is None and t_frac < unseeded_floor:
                break

    if best is None:
        return QuoteVerdict(QuoteStatus.NOT_FOUND)

    matches = []
    for doc_id, ns, ne, raw, denom in sorted(set(best[1])):
        doc = index._docs[doc_id]
        start, end = doc.offsets.to_original(ns, ne)
        matches.append(QuoteMatch(doc_id, start, end, raw / denom))
    return QuoteVerdict(QuoteStatus.NEAR, tuple(matches))
