"""
Text and entity evaluation.

Character alignment, tag-free CER/WER, entity F1 with a CER acceptance threshold, and
IEHHR basic/complete scores. All inputs are tag-free: callers strip tags first.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Union

import Levenshtein
import numpy as np

from ..constants import DEFAULT_CER_THRESHOLD, REPORT_DECIMALS
from ..models.document import (
    Block,
    Page,
    RecordD,
    Scope,
    Word,
    entity_runs,
    plain_text,
    scope_entity_runs,
    select_blocks,
)
from ..models.ontology import EntityLabel, Tag, TagOntology, composite_name
from ..validators import MetricError, is_private_use, validate_threshold
from .codecs import (
    DEFAULT_OPTIONS,
    CodecOptions,
    DecodePolicy,
    EncodingScheme,
    TaggedString,
    decode,
)
from .layout import parse_page, parse_page_with_diagnostics


class EditOp(Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    INSERT = "insert"
    DELETE = "delete"


@dataclass(frozen=True)
class Alignment:
    """
    Minimal unit-cost alignment of a reference string to a hypothesis string.

    Each op is ``(op, ref_pos, hyp_pos)``. INSERT ops carry the reference position they
    are inserted before; DELETE ops carry the hypothesis position the deleted character
    would have occupied.
    """

    ops: tuple[tuple[EditOp, int, int], ...]
    cost: int
    ref_length: int
    hyp_length: int


@dataclass(frozen=True)
class ProjectedSpan:
    start: int
    end: int
    deleted: bool = False

    def overlaps(self, start: int, end: int) -> bool:
        return not self.deleted and self.start < end and start < self.end


def _codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32)


def _distance_matrix(ref: str, hyp: str) -> np.ndarray:
    n, m = len(ref), len(hyp)
    a, b = _codepoints(ref), _codepoints(hyp)
    cols = np.arange(m + 1, dtype=np.int32)
    d = np.empty((n + 1, m + 1), dtype=np.int32)
    d[0] = cols
    row = np.empty(m + 1, dtype=np.int32)
    for i in range(1, n + 1):
        row[0] = i
        np.minimum(d[i - 1, 1:] + 1, d[i - 1, :-1] + (b != a[i - 1]), out=row[1:])
        # insertions chain along the row: d[i][j] = min_k (row[k] + j - k)
        d[i] = np.minimum.accumulate(row - cols) + cols
    return d


def edit_distance(ref: str, hyp: str) -> Alignment:
    """
    Align two strings with unit-cost Levenshtein operations.

    Ties are broken by preferring MATCH/SUBSTITUTE, then INSERT, then DELETE while
    walking back from the end of both strings, so alignments are deterministic.

    Examples:
        >>> edit_distance("kitten", "sitting").cost
        3
    """
    n, m = len(ref), len(hyp)
    # a shared suffix always aligns as matches under this tie-breaking
    suffix = 0
    while suffix < min(n, m) and ref[n - 1 - suffix] == hyp[m - 1 - suffix]:
        suffix += 1
    i, j = n - suffix, m - suffix
    tail = [(EditOp.MATCH, i + k, j + k) for k in range(suffix)]
    if i == 0 and j == 0:
        return Alignment(tuple(tail), 0, n, m)

    d = _distance_matrix(ref[:i], hyp[:j])
    cost = int(d[i, j])
    ops = []
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if d[i, j] == d[i - 1, j - 1] + (0 if same else 1):
                ops.append((EditOp.MATCH if same else EditOp.SUBSTITUTE, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if j > 0 and d[i, j] == d[i, j - 1] + 1:
            ops.append((EditOp.INSERT, i, j - 1))
            j -= 1
        else:
            ops.append((EditOp.DELETE, i - 1, j))
            i -= 1
    ops.reverse()
    return Alignment(tuple(ops + tail), cost, n, m)


def _check_stripped(text: str, ont: TagOntology | None) -> None:
    reserved = ont.tokens if ont is not None else frozenset()
    for ch in text:
        if is_private_use(ch) or ch in reserved:
            raise MetricError(f"unstripped tag token U+{ord(ch):04X}")


def cer(ref: str, hyp: str, ont: TagOntology | None = None) -> float:
    """
    Character error rate: edit cost over ``max(1, len(ref))``.

    Raises:
        MetricError: If either side still contains a tag token
    """
    _check_stripped(ref, ont)
    _check_stripped(hyp, ont)
    return Levenshtein.distance(ref, hyp) / max(1, len(ref))


def wer(ref: str, hyp: str, ont: TagOntology | None = None) -> float:
    """Word error rate over whitespace-delimited tokens (see ``cer``)."""
    _check_stripped(ref, ont)
    _check_stripped(hyp, ont)
    ref_words = ref.split()
    return Levenshtein.distance(ref_words, hyp.split()) / max(1, len(ref_words))


@dataclass(frozen=True)
class ErrorRates:
    """Additive edit counts; rates are recomputed from the totals."""

    char_errors: int = 0
    char_total: int = 0
    word_errors: int = 0
    word_total: int = 0

    @property
    def cer(self) -> float:
        return self.char_errors / max(1, self.char_total)

    @property
    def wer(self) -> float:
        return self.word_errors / max(1, self.word_total)

    def __add__(self, other: ErrorRates) -> ErrorRates:
        return ErrorRates(
            self.char_errors + other.char_errors,
            self.char_total + other.char_total,
            self.word_errors + other.word_errors,
            self.word_total + other.word_total,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "cer": self.cer,
            "wer": self.wer,
            "char_errors": self.char_errors,
            "char_total": self.char_total,
            "word_errors": self.word_errors,
            "word_total": self.word_total,
        }


def error_rates(ref: str, hyp: str, ont: TagOntology | None = None) -> ErrorRates:
    _check_stripped(ref, ont)
    _check_stripped(hyp, ont)
    ref_words = ref.split()
    return ErrorRates(
        char_errors=Levenshtein.distance(ref, hyp),
        char_total=len(ref),
        word_errors=Levenshtein.distance(ref_words, hyp.split()),
        word_total=len(ref_words),
    )


def corpus_error_rates(
    pairs: Iterable[tuple[str, str]], ont: TagOntology | None = None
) -> ErrorRates:
    """Corpus CER/WER: summed edit costs over summed reference lengths."""
    total = ErrorRates()
    for ref, hyp in pairs:
        total = total + error_rates(ref, hyp, ont)
    return total


def project_spans(al: Alignment, ref_spans: Sequence[tuple[int, int]]) -> list[ProjectedSpan]:
    """
    Map reference character spans onto the hypothesis through an alignment.

    Each span maps to the smallest hypothesis interval covering the positions aligned
    (MATCH or SUBSTITUTE) to its characters. A span with no aligned character maps to
    an empty span at its insertion point, flagged ``deleted``.

    Raises:
        MetricError: If a span lies outside the reference
    """
    aligned = [-1] * al.ref_length
    point = [al.hyp_length] * (al.ref_length + 1)
    for op, ref_pos, hyp_pos in al.ops:
        if op is EditOp.INSERT:
            continue
        point[ref_pos] = hyp_pos
        if op is not EditOp.DELETE:
            aligned[ref_pos] = hyp_pos

    projected = []
    for start, end in ref_spans:
        if not 0 <= start <= end <= al.ref_length:
            raise MetricError(f"span ({start}, {end}) out of bounds for length {al.ref_length}")
        hits = [pos for pos in aligned[start:end] if pos >= 0]
        if hits:
            projected.append(ProjectedSpan(min(hits), max(hits) + 1))
        else:
            projected.append(ProjectedSpan(point[start], point[start], deleted=True))
    return projected


@dataclass(frozen=True)
class Entity:
    label: EntityLabel
    start: int
    end: int
    text: str

    @property
    def category(self) -> str:
        return composite_name(self.label)


def _entity_cer(ref: Entity, hyp: Entity) -> float:
    return Levenshtein.distance(ref.text, hyp.text) / max(1, len(ref.text))


def extract_entities(words: Sequence[Word] | Scope) -> tuple[str, list[Entity]]:
    """
    Space-joined text of ``words`` and its entities with character offsets.

    Given a page, record or block, entities stop at block boundaries.
    """
    if isinstance(words, (Page, RecordD, Block)):
        runs = scope_entity_runs(words)
        words = words.words
    else:
        runs = entity_runs(words)
    starts = []
    offset = 0
    for word in words:
        starts.append(offset)
        offset += len(word.text) + 1
    text = " ".join(word.text for word in words)
    entities = []
    for first, last, label in runs:
        start = starts[first]
        end = starts[last - 1] + len(words[last - 1].text)
        entities.append(Entity(label, start, end, text[start:end]))
    return text, entities


@dataclass(frozen=True)
class CategoryScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    def __add__(self, other: CategoryScore) -> CategoryScore:
        return CategoryScore(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


def _percent(value: float) -> str:
    return f"{100 * value:.{REPORT_DECIMALS}f}"


@dataclass(frozen=True)
class EvalReport:
    """Entity scores per composite category plus micro averages."""

    categories: Mapping[str, CategoryScore] = field(default_factory=dict)
    threshold: float = DEFAULT_CER_THRESHOLD

    @property
    def micro(self) -> CategoryScore:
        total = CategoryScore()
        for score in self.categories.values():
            total = total + score
        return total

    def merge(self, other: EvalReport) -> EvalReport:
        merged = dict(self.categories)
        for name, score in other.categories.items():
            merged[name] = merged.get(name, CategoryScore()) + score
        return EvalReport(merged, self.threshold)

    def to_dict(self) -> dict[str, Any]:
        return {
            "threshold": self.threshold,
            "categories": {
                name: score.to_dict() for name, score in sorted(self.categories.items())
            },
            "micro": self.micro.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        width = max([len("category"), *(len(name) for name in self.categories)]) + 2
        header = f"{'category':<{width}}{'P':>8}{'R':>8}{'F1':>8}{'support':>9}"
        lines = [header, "-" * len(header)]
        rows = [(name, self.categories[name]) for name in sorted(self.categories)]
        rows.append(("ALL", self.micro))
        for name, score in rows:
            lines.append(
                f"{name:<{width}}{_percent(score.precision):>8}{_percent(score.recall):>8}"
                f"{_percent(score.f1):>8}{score.support:>9}"
            )
        return "\n".join(lines)


HypothesisInput = Union[TaggedString, Page, Sequence[Word]]
ReferenceInput = Union[Page, Sequence[Word]]
Entities = Union[Scope, Sequence[Word]]


def _hypothesis(
    value: HypothesisInput,
    policy: DecodePolicy,
    ont: TagOntology | None,
    options: CodecOptions,
) -> Entities:
    if isinstance(value, TaggedString):
        if value.layout:
            return parse_page(value.text, policy, value.scheme, ont, options)
        return decode(value, policy, ont, options)
    return value


def _candidate_pairs(
    ref: Entities, hyp: Entities
) -> tuple[list[Entity], list[ProjectedSpan], list[Entity]]:
    ref_text, ref_entities = extract_entities(ref)
    hyp_text, hyp_entities = extract_entities(hyp)
    alignment = edit_distance(ref_text, hyp_text)
    projected = project_spans(alignment, [(e.start, e.end) for e in ref_entities])
    return ref_entities, projected, hyp_entities


def nerval_eval(
    ref: ReferenceInput,
    hyp: HypothesisInput,
    threshold: float = DEFAULT_CER_THRESHOLD,
    policy: DecodePolicy = DecodePolicy.LENIENT,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> EvalReport:
    """
    Entity precision, recall and F1 after character alignment.

    Hypothesis entities are visited in reading order. One is a true positive when an
    unmatched reference entity of the same composite category has a projected span
    overlapping it and the CER between the two entity texts is at most ``threshold``.
    Among several candidates the lowest CER wins, then the earliest reference entity.

    Raises:
        DecodeError: When ``hyp`` is a tagged string and ``policy`` is STRICT
        MetricError: If the threshold is negative
    """
    validate_threshold(threshold)
    ref_entities, projected, hyp_entities = _candidate_pairs(
        ref, _hypothesis(hyp, policy, ont, options)
    )

    candidates: dict[EntityLabel, list[int]] = {}
    for k, r in enumerate(ref_entities):
        candidates.setdefault(r.label, []).append(k)
    counts: dict[str, list[int]] = {}
    matched = [False] * len(ref_entities)
    for h in hyp_entities:
        best: tuple[float, int] | None = None
        for k in candidates.get(h.label, ()):
            if matched[k] or not projected[k].overlaps(h.start, h.end):
                continue
            score = _entity_cer(ref_entities[k], h)
            if score <= threshold and (best is None or score < best[0]):
                best = (score, k)
        tally = counts.setdefault(h.category, [0, 0, 0])
        if best is None:
            tally[1] += 1
        else:
            matched[best[1]] = True
            tally[0] += 1
    for k, r in enumerate(ref_entities):
        if not matched[k]:
            counts.setdefault(r.category, [0, 0, 0])[2] += 1

    categories = {name: CategoryScore(*tally) for name, tally in counts.items()}
    return EvalReport(categories, threshold)


@dataclass(frozen=True)
class RecordScore:
    basic: float
    complete: float


@dataclass(frozen=True)
class IehhrReport:
    """IEHHR percentages; overall scores are the mean of the per-record scores."""

    records: tuple[RecordScore, ...] = ()

    @property
    def basic(self) -> float:
        return sum(r.basic for r in self.records) / len(self.records) if self.records else 100.0

    @property
    def complete(self) -> float:
        if not self.records:
            return 100.0
        return sum(r.complete for r in self.records) / len(self.records)

    def merge(self, other: IehhrReport) -> IehhrReport:
        return IehhrReport(self.records + other.records)

    def to_dict(self) -> dict[str, Any]:
        return {
            "basic": self.basic,
            "complete": self.complete,
            "records": [{"basic": r.basic, "complete": r.complete} for r in self.records],
        }

    def to_table(self) -> str:
        return (
            f"IEHHR basic {self.basic:.{REPORT_DECIMALS}f}  "
            f"complete {self.complete:.{REPORT_DECIMALS}f}  "
            f"({len(self.records)} records)"
        )


def _score_record(ref: Entities, hyp: Entities) -> RecordScore:
    ref_entities, projected, hyp_entities = _candidate_pairs(ref, hyp)
    if not ref_entities:
        return RecordScore(100.0, 100.0) if not hyp_entities else RecordScore(0.0, 0.0)

    candidates: dict[Tag, list[int]] = {}
    for k, r in enumerate(ref_entities):
        candidates.setdefault(r.label.leaf, []).append(k)
    pairs: dict[int, Entity] = {}
    for h in hyp_entities:
        best: tuple[bool, float, int] | None = None
        for k in candidates.get(h.label.leaf, ()):
            if k in pairs or not projected[k].overlaps(h.start, h.end):
                continue
            r = ref_entities[k]
            key = (r.label != h.label, _entity_cer(r, h), k)
            if best is None or key < best:
                best = key
        if best is not None:
            pairs[best[2]] = h

    basic = complete = 0.0
    for k, r in enumerate(ref_entities):
        h = pairs.get(k)
        if h is None:
            continue
        contribution = 100 * max(0.0, 1 - _entity_cer(r, h))
        basic += contribution
        if h.label == r.label:
            complete += contribution
    return RecordScore(basic / len(ref_entities), complete / len(ref_entities))


def iehhr_eval(
    ref: ReferenceInput,
    hyp: HypothesisInput,
    policy: DecodePolicy = DecodePolicy.LENIENT,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> IehhrReport:
    """
    IEHHR basic and complete scores.

    Entities pair up by level-4 category and overlapping projected span, preferring an
    identical full label, then the lowest CER. A paired reference entity contributes
    ``100 * max(0, 1 - cer)`` to basic, and to complete only when every level matches.
    Pages with equal record counts are scored record by record; otherwise each side is
    treated as a single record.
    """
    if isinstance(hyp, TaggedString) and hyp.layout:
        hyp = parse_page(hyp.text, policy, hyp.scheme, ont, options)
    if isinstance(ref, Page) and isinstance(hyp, Page) and len(ref.records) == len(hyp.records):
        pairs = list(zip(ref.records, hyp.records))
    else:
        pairs = [(ref, _hypothesis(hyp, policy, ont, options))]
        if isinstance(ref, Page) and isinstance(hyp, Page):
            logging.warning(
                "Record count mismatch on page %s (%d vs %d), scoring as one record",
                ref.id, len(ref.records), len(hyp.records),
            )
    return IehhrReport(tuple(_score_record(r, h) for r, h in pairs))


@dataclass(frozen=True)
class PageEvaluation:
    page_id: str
    entities: EvalReport
    rates: ErrorRates
    iehhr: IehhrReport
    repairs: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.page_id,
            "cer": self.rates.cer,
            "wer": self.rates.wer,
            "f1": self.entities.micro.f1,
            "iehhr_basic": self.iehhr.basic,
            "iehhr_complete": self.iehhr.complete,
            "repairs": self.repairs,
        }


@dataclass(frozen=True)
class CorpusEvaluation:
    """Per-page results reduced in page order."""

    pages: tuple[PageEvaluation, ...]
    threshold: float = DEFAULT_CER_THRESHOLD
    blocks: str = "ABC"

    @property
    def entities(self) -> EvalReport:
        total = EvalReport(threshold=self.threshold)
        for page in self.pages:
            total = total.merge(page.entities)
        return total

    @property
    def rates(self) -> ErrorRates:
        total = ErrorRates()
        for page in self.pages:
            total = total + page.rates
        return total

    @property
    def iehhr(self) -> IehhrReport:
        total = IehhrReport()
        for page in self.pages:
            total = total.merge(page.iehhr)
        return total

    def to_dict(self) -> dict[str, Any]:
        iehhr = self.iehhr
        return {
            "blocks": self.blocks,
            "threshold": self.threshold,
            "entities": self.entities.to_dict(),
            "text": self.rates.to_dict(),
            "iehhr": {
                "basic": iehhr.basic,
                "complete": iehhr.complete,
                "records": len(iehhr.records),
            },
            "pages": [page.to_dict() for page in self.pages],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    def to_table(self) -> str:
        rates = self.rates
        return "\n".join(
            [
                f"pages {len(self.pages)}  blocks {self.blocks}  threshold {self.threshold:.2f}",
                f"CER {_percent(rates.cer)}  WER {_percent(rates.wer)}",
                self.iehhr.to_table(),
                "",
                self.entities.to_table(),
            ]
        )


def evaluate_page(
    ref: Page,
    hyp_text: str,
    scheme: EncodingScheme | None,
    policy: DecodePolicy = DecodePolicy.LENIENT,
    threshold: float = DEFAULT_CER_THRESHOLD,
    blocks: str = "ABC",
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> PageEvaluation:
    """
    Score one predicted label string against its reference page.

    Both sides are restricted to ``blocks`` before scoring. CER and WER compare the
    tag-free text of the two pages; entity and IEHHR scores use the decoded labels.

    Raises:
        LayoutError: If ``hyp_text`` violates the layout grammar under STRICT policy
        DecodeError: If an entity tag stream is malformed under STRICT policy
    """
    hyp, diagnostics = parse_page_with_diagnostics(hyp_text, policy, scheme, ont, options, ref.id)
    ref, hyp = select_blocks(ref, blocks), select_blocks(hyp, blocks)
    return PageEvaluation(
        page_id=ref.id,
        entities=nerval_eval(ref, hyp, threshold, policy, ont, options),
        rates=error_rates(plain_text(ref), plain_text(hyp), ont),
        iehhr=iehhr_eval(ref, hyp, policy, ont, options),
        repairs=len(diagnostics),
    )
