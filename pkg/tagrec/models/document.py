"""
Document model: pages of records, records of blocks, blocks of labeled words.

Also home of the interchange file codec and corpus statistics.
"""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Any, Union

from ..constants import BLOCK_KINDS
from ..validators import DocumentError, OntologyError, validate_word_text
from .ontology import EntityLabel, TagOntology, canonical_label


@dataclass(frozen=True)
class Word:
    text: str
    label: EntityLabel | None = None

    def __post_init__(self):
        validate_word_text(self.text)


@dataclass(frozen=True)
class Block:
    kind: str
    words: tuple[Word, ...] = ()

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise DocumentError(f"unknown block kind '{self.kind}'")


@dataclass(frozen=True)
class RecordD:
    """One marriage record: exactly one A block, one B block, and zero or more C blocks."""

    a: Block
    b: Block
    c: tuple[Block, ...] = ()

    def __post_init__(self):
        if self.a.kind != "A" or self.b.kind != "B" or any(blk.kind != "C" for blk in self.c):
            raise DocumentError("record blocks must be one A, one B, then C blocks")

    @property
    def blocks(self) -> tuple[Block, ...]:
        return (self.a, self.b, *self.c)

    @property
    def words(self) -> tuple[Word, ...]:
        return tuple(w for blk in self.blocks for w in blk.words)


@dataclass(frozen=True)
class Page:
    id: str
    records: tuple[RecordD, ...] = ()

    @property
    def words(self) -> tuple[Word, ...]:
        return tuple(w for rec in self.records for w in rec.words)


Scope = Union[Page, RecordD, Block]


@dataclass(frozen=True)
class StatsReport:
    """Corpus totals; averages are per record."""

    pages: int = 0
    records: int = 0
    words: int = 0
    characters: int = 0
    entities: int = 0
    tag_counts: Mapping[str, int] = field(default_factory=dict)

    def _per_record(self, total: int) -> float:
        return total / self.records if self.records else 0.0

    @property
    def characters_per_record(self) -> float:
        return self._per_record(self.characters)

    @property
    def words_per_record(self) -> float:
        return self._per_record(self.words)

    @property
    def entities_per_record(self) -> float:
        return self._per_record(self.entities)

    def __add__(self, other: StatsReport) -> StatsReport:
        return StatsReport(
            pages=self.pages + other.pages,
            records=self.records + other.records,
            words=self.words + other.words,
            characters=self.characters + other.characters,
            entities=self.entities + other.entities,
            tag_counts=dict(Counter(self.tag_counts) + Counter(other.tag_counts)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "totals": {
                "pages": self.pages,
                "records": self.records,
                "words": self.words,
                "characters": self.characters,
                "entities": self.entities,
            },
            "per_record": {
                "characters": round(self.characters_per_record, 2),
                "words": round(self.words_per_record, 2),
                "entities": round(self.entities_per_record, 2),
            },
            "tag_counts": dict(sorted(self.tag_counts.items())),
        }

    def to_table(self) -> str:
        lines = [
            f"pages {self.pages}  records {self.records}  entities {self.entities}",
            f"per record: {self.characters_per_record:.2f} characters, "
            f"{self.words_per_record:.2f} words, {self.entities_per_record:.2f} entities",
            "",
            f"{'tag':<16}{'occurrences':>12}",
        ]
        lines.extend(f"{name:<16}{count:>12}" for name, count in sorted(self.tag_counts.items()))
        return "\n".join(lines)


def entity_runs(words: Sequence[Word]) -> list[tuple[int, int, EntityLabel]]:
    """
    Group labeled words into entities.

    An entity is a maximal run of consecutive words carrying an identical label.

    Returns:
        List of (first word index, end word index exclusive, label)
    """
    runs: list[tuple[int, int, EntityLabel]] = []
    start = 0
    for i in range(1, len(words) + 1):
        if i < len(words) and words[i].label == words[start].label:
            continue
        if words[start].label is not None:
            runs.append((start, i, words[start].label))
        start = i
    return runs


def block_words(scope: Scope) -> tuple[tuple[Word, ...], ...]:
    """Words of each block of a page, record or block, in reading order."""
    if isinstance(scope, Block):
        return (scope.words,)
    if isinstance(scope, RecordD):
        return tuple(blk.words for blk in scope.blocks)
    return tuple(blk.words for rec in scope.records for blk in rec.blocks)


def scope_entity_runs(scope: Scope) -> list[tuple[int, int, EntityLabel]]:
    """
    Entity runs of a page, record or block.

    Indexes refer to ``scope.words``. A run never crosses a block boundary, so the last
    word of one record and the first word of the next stay separate entities.
    """
    runs: list[tuple[int, int, EntityLabel]] = []
    offset = 0
    for words in block_words(scope):
        for first, end, label in entity_runs(words):
            runs.append((offset + first, offset + end, label))
        offset += len(words)
    return runs


def plain_text(scope: Scope) -> str:
    """
    Tag-free text of a page, record or block.

    Words are joined by single spaces, non-empty blocks and records by single newlines.
    """
    if isinstance(scope, Block):
        return " ".join(w.text for w in scope.words)
    if isinstance(scope, RecordD):
        return "\n".join(text for text in (plain_text(blk) for blk in scope.blocks) if text)
    return "\n".join(text for text in (plain_text(rec) for rec in scope.records) if text)


def select_blocks(page: Page, kinds: Iterable[str]) -> Page:
    """
    Restrict a page to the given block kinds.

    Excluded A and B blocks are emptied (records keep their shape), excluded C blocks
    are removed.
    """
    keep = set(kinds)
    unknown = keep - set(BLOCK_KINDS)
    if unknown:
        raise DocumentError(f"unknown block kinds: {', '.join(sorted(unknown))}")
    records = tuple(
        RecordD(
            a=rec.a if "A" in keep else Block("A"),
            b=rec.b if "B" in keep else Block("B"),
            c=rec.c if "C" in keep else (),
        )
        for rec in page.records
    )
    return replace(page, records=records)


def validate_page(page: Page, ont: TagOntology | None = None) -> None:
    """
    Check every document invariant of ``page``.

    Raises:
        DocumentError: naming the record and word index of the first violation
    """
    if not page.records:
        raise DocumentError("page has no records")
    reserved = ont.tokens if ont is not None else frozenset()
    for r, rec in enumerate(page.records):
        for w, word in enumerate(rec.words):
            try:
                validate_word_text(word.text, reserved)
                if word.label is not None and ont is not None:
                    if canonical_label(word.label.tags, ont) != word.label:
                        raise DocumentError("label is not canonical")
            except OntologyError as e:
                raise DocumentError(f"invalid label: {e!s}", r, w) from e
            except DocumentError as e:
                raise DocumentError(str(e), r, w) from e


def _word_from_json(raw: Any, ont: TagOntology, r: int, w: int) -> Word:
    try:
        if isinstance(raw, str):
            return Word(raw)
        if isinstance(raw, Mapping) and isinstance(raw.get("t"), str):
            names = raw.get("l") or []
            label = canonical_label(names, ont) if names else None
            return Word(raw["t"], label)
    except OntologyError as e:
        raise DocumentError(str(e), r, w) from e
    except DocumentError as e:
        raise DocumentError(str(e), r, w) from e
    raise DocumentError("word must be a string or an object {t, l}", r, w)


def _block_from_json(raw: Any, kind: str, ont: TagOntology, r: int, offset: int) -> Block:
    if not isinstance(raw, Mapping) or not isinstance(raw.get("words"), list):
        raise DocumentError(f"block {kind} must be an object with a 'words' array", r)
    return Block(
        kind, tuple(_word_from_json(x, ont, r, offset + i) for i, x in enumerate(raw["words"]))
    )


def read_document(content: str | bytes, ont: TagOntology) -> Page:
    """
    Parse an interchange file into a validated Page.

    Args:
        content: UTF-8 JSON ``{id, records: [{A: {words}, B: {words}, C: [{words}]}]}``;
            each word is a bare string or ``{"t": text, "l": [tag names]}``
        ont: Ontology resolving tag names

    Raises:
        DocumentError: On malformed syntax, unknown tag names, or invariant violations
            (with record and word index)
    """
    try:
        document = json.loads(content)
    except json.JSONDecodeError as e:
        raise DocumentError(f"malformed document: {e!s}") from e
    if not isinstance(document, Mapping) or not isinstance(document.get("records"), list):
        raise DocumentError("document must be an object with a 'records' array")
    if not document["records"]:
        raise DocumentError("page has no records")

    records = []
    for r, raw in enumerate(document["records"]):
        if not isinstance(raw, Mapping):
            raise DocumentError("record must be an object", r)
        for kind in ("A", "B"):
            if kind not in raw:
                raise DocumentError(f"record missing block {kind}", r)
        a = _block_from_json(raw["A"], "A", ont, r, 0)
        b = _block_from_json(raw["B"], "B", ont, r, len(a.words))
        raw_c = raw.get("C", [])
        if not isinstance(raw_c, list):
            raise DocumentError("C must be an array of blocks", r)
        c = []
        offset = len(a.words) + len(b.words)
        for raw_block in raw_c:
            block = _block_from_json(raw_block, "C", ont, r, offset)
            offset += len(block.words)
            c.append(block)
        records.append(RecordD(a, b, tuple(c)))

    page = Page(str(document.get("id", "")), tuple(records))
    validate_page(page, ont)
    return page


def _word_to_json(word: Word) -> str | dict[str, Any]:
    if word.label is None:
        return word.text
    return {"l": list(word.label.names), "t": word.text}


def write_document(page: Page) -> str:
    """Serialize a page to canonical interchange JSON (sorted keys, two-space indent)."""
    document = {
        "id": page.id,
        "records": [
            {
                "A": {"words": [_word_to_json(w) for w in rec.a.words]},
                "B": {"words": [_word_to_json(w) for w in rec.b.words]},
                "C": [{"words": [_word_to_json(w) for w in blk.words]} for blk in rec.c],
            }
            for rec in page.records
        ],
    }
    return json.dumps(document, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _page_stats(page: Page) -> StatsReport:
    words = characters = 0
    tag_counts: Counter[str] = Counter()
    for rec in page.records:
        characters += len(plain_text(rec))
        words += len(rec.words)
    runs = scope_entity_runs(page)
    entities = len(runs)
    for _, _, label in runs:
        tag_counts.update(label.names)
    return StatsReport(
        pages=1,
        records=len(page.records),
        words=words,
        characters=characters,
        entities=entities,
        tag_counts=dict(tag_counts),
    )


def corpus_stats(pages: Iterable[Page]) -> StatsReport:
    """
    Aggregate annotation statistics over pages.

    Characters are counted on ``plain_text`` of each record (spaces and newlines
    included); entities are maximal same-label runs of words within one block; tag
    counts add one occurrence per entity for each of its components.
    """
    total = StatsReport()
    for page in pages:
        total = total + _page_stats(page)
    return total


def split_stats(pages_by_split: Mapping[str, Iterable[Page]]) -> dict[str, StatsReport]:
    """Per-split statistics (train / valid / test)."""
    return {split: corpus_stats(pages) for split, pages in pages_by_split.items()}

