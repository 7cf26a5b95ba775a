"""
Seeded synthetic marriage-record pages.

Every record follows one template: the marriage date and time, the husband and his
parents, the wife and hers, then two witnesses, with carrier sentences between sections.
Values come from per-tag lexicons; carrier sentences come from a one-sentence-per-line
text file. Each page draws from its own PCG64 stream seeded by (config seed, page index),
so pages can be generated in any order or in parallel.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from importlib.resources import files
from pathlib import Path
from typing import Any, Union

import numpy as np

from ..constants import (
    DEFAULT_C_BLOCK_PROBABILITY,
    DEFAULT_JOBS,
    DEFAULT_LABEL_PROBABILITY,
    DEFAULT_RECORDS_PER_PAGE,
    DEFAULT_REPEAT_PROBABILITY,
    PRNG_ALGORITHM,
    SPLIT_RATIOS,
)
from ..models.document import Block, Page, RecordD, Word
from ..models.ontology import EntityLabel, TagOntology, canonical_label, default_ontology
from ..validators import DocumentError, LexiconError, validate_probability, validate_word_text


@dataclass(frozen=True)
class Slot:
    """A value position in the record template, labeled with ``tags`` (leaf last)."""

    tags: tuple[str, ...]

    @property
    def leaf(self) -> str:
        return self.tags[-1]


@dataclass(frozen=True)
class Carrier:
    """Position of an unlabeled carrier sentence."""


CARRIER = Carrier()
TemplateItem = Union[str, Slot, Carrier]


def _person(role: tuple[str, ...]) -> tuple[TemplateItem, ...]:
    return (Slot((*role, "first_name")), Slot((*role, "family_name")))


def _date(role: tuple[str, ...]) -> tuple[TemplateItem, ...]:
    return (Slot((*role, "day")), Slot((*role, "month")), Slot((*role, "year")))


def _address(role: tuple[str, ...]) -> tuple[TemplateItem, ...]:
    residence = (*role, "residence")
    return (
        "demeurant au",
        Slot((*residence, "street_number")),
        Slot((*residence, "street_type")),
        Slot((*residence, "street_name")),
        "à",
        Slot((*residence, "city")),
    )


def _parents(role: str, relation: str) -> tuple[TemplateItem, ...]:
    return (
        f", {relation} de",
        *_person((role, "father")),
        ",",
        Slot((role, "father", "occupation")),
        ", et de",
        *_person((role, "mother")),
        ", domiciliés à",
        Slot((role, "father", "mother", "residence", "city")),
    )


def _witness(connector: str) -> tuple[TemplateItem, ...]:
    return (
        connector,
        *_person(("witness",)),
        ",",
        Slot(("witness", "occupation")),
        ", âgé de",
        Slot(("witness", "age")),
        "ans",
    )


RECORD_TEMPLATE: tuple[TemplateItem, ...] = (
    "L'an",
    Slot(("administrative", "year")),
    "le",
    Slot(("administrative", "day")),
    Slot(("administrative", "month")),
    "à",
    Slot(("administrative", "hour")),
    "heures",
    Slot(("administrative", "minute")),
    "minutes, devant Nous ont comparu publiquement en la maison commune :",
    CARRIER,
    *_person(("husband",)),
    ",",
    Slot(("husband", "occupation")),
    ", âgé de",
    Slot(("husband", "age")),
    "ans, né à",
    Slot(("husband", "birth", "city")),
    "(",
    Slot(("husband", "birth", "departement")),
    ") le",
    *_date(("husband", "birth")),
    ",",
    *_address(("husband",)),
    *_parents("husband", "fils"),
    ";",
    CARRIER,
    "et",
    *_person(("wife",)),
    ",",
    Slot(("wife", "occupation")),
    ", âgée de",
    Slot(("wife", "age")),
    "ans, née à",
    Slot(("wife", "birth", "city")),
    "(",
    Slot(("wife", "birth", "country")),
    ") le",
    *_date(("wife", "birth")),
    ", veuve de",
    *_person(("wife", "ex_husband")),
    ",",
    *_address(("wife",)),
    *_parents("wife", "fille"),
    ".",
    CARRIER,
    *_witness("En présence de"),
    *_witness(", et de"),
    ", témoins.",
    CARRIER,
)

TEMPLATE_SLOT_COUNT = sum(isinstance(item, Slot) for item in RECORD_TEMPLATE)
TEMPLATE_CARRIER_COUNT = sum(isinstance(item, Carrier) for item in RECORD_TEMPLATE)


@dataclass(frozen=True)
class Lexicons:
    """Value pools (word lists) and inclusive integer ranges keyed by level-4 tag name."""

    pools: Mapping[str, tuple[str, ...]]
    ranges: Mapping[str, tuple[int, int]]

    def covers(self, name: str) -> bool:
        return name in self.pools or name in self.ranges

    def sample(self, name: str, rng: np.random.Generator) -> list[str]:
        if name in self.ranges:
            low, high = self.ranges[name]
            return [str(int(rng.integers(low, high + 1)))]
        pool = self.pools[name]
        return pool[int(rng.integers(len(pool)))].split()


def _parse_range(name: str, raw: Mapping[str, Any]) -> tuple[int, int]:
    try:
        low, high = int(raw["min"]), int(raw["max"])
    except (KeyError, TypeError, ValueError) as e:
        raise LexiconError(f"range for '{name}' needs integer min and max: {e!s}") from e
    if low > high:
        raise LexiconError(f"range for '{name}' has min {low} above max {high}")
    return low, high


def _parse_pool(name: str, raw: Sequence[Any]) -> tuple[str, ...]:
    if not raw:
        raise LexiconError(f"empty pool for tag '{name}'")
    values = []
    for value in raw:
        if not isinstance(value, str) or not value.split():
            raise LexiconError(f"pool for '{name}' holds an empty or non-text value: {value!r}")
        try:
            for word in value.split():
                validate_word_text(word)
        except DocumentError as e:
            raise LexiconError(f"pool for '{name}': {e!s}") from e
        values.append(" ".join(value.split()))
    return tuple(values)


def load_lexicons(
    source: str | bytes | Mapping[str, Any], ont: TagOntology | None = None
) -> Lexicons:
    """
    Load value pools for every level-4 tag of the ontology.

    Args:
        source: JSON text or an already parsed mapping of tag name to a value array or
            a ``{"min": int, "max": int}`` range
        ont: Ontology whose level-4 tags must all be covered

    Raises:
        LexiconError: If a level-4 tag has no pool, or a pool or range is invalid
    """
    ont = ont or default_ontology()
    if isinstance(source, Mapping):
        document = source
    else:
        try:
            document = json.loads(source)
        except json.JSONDecodeError as e:
            raise LexiconError(f"malformed lexicon file: {e!s}") from e
    if not isinstance(document, Mapping):
        raise LexiconError("lexicon file must be an object keyed by tag name")

    pools: dict[str, tuple[str, ...]] = {}
    ranges: dict[str, tuple[int, int]] = {}
    for name, raw in document.items():
        if isinstance(raw, Mapping):
            ranges[name] = _parse_range(name, raw)
        elif isinstance(raw, list):
            pools[name] = _parse_pool(name, raw)
        else:
            raise LexiconError(f"lexicon entry '{name}' must be an array or a range")

    lexicons = Lexicons(pools, ranges)
    for tag in ont.tags:
        if tag.level == 4 and not lexicons.covers(tag.name):
            raise LexiconError(f"missing pool for level-4 tag '{tag.name}'")
    extra = set(document) - {tag.name for tag in ont.tags}
    if extra:
        logging.warning("Ignoring lexicon entries for unknown tags: %s", ", ".join(sorted(extra)))
    return lexicons


def _bundled(name: str) -> str:
    return files("tagrec").joinpath("data").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def default_lexicons() -> Lexicons:
    """Bundled lexicons for the default ontology."""
    return load_lexicons(_bundled("lexicons.json"))


def load_sentences(text: str) -> tuple[tuple[str, ...], ...]:
    """
    Split a carrier corpus (one sentence per line) into word tuples.

    Lines that cannot be expressed as valid words (markup brackets, reserved tokens)
    are skipped.

    Raises:
        LexiconError: If no usable sentence remains
    """
    sentences = []
    skipped = 0
    for line in text.splitlines():
        words = line.split()
        if not words:
            continue
        if "<" in line or ">" in line:
            skipped += 1
            continue
        try:
            for word in words:
                validate_word_text(word)
        except DocumentError:
            skipped += 1
            continue
        sentences.append(tuple(words))
    if skipped:
        logging.debug("Skipped %d carrier sentences with reserved characters", skipped)
    if not sentences:
        raise LexiconError("no usable carrier sentences")
    return tuple(sentences)


@lru_cache(maxsize=8)
def sentences_from_path(path: str | None) -> tuple[tuple[str, ...], ...]:
    """Carrier sentences from ``path``, or the bundled file when None."""
    if path is None:
        return load_sentences(_bundled("sentences.txt"))
    try:
        return load_sentences(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise LexiconError(f"cannot read carrier sentences from {path}: {e!s}") from e


@dataclass(frozen=True)
class GenConfig:
    """
    Generator knobs. The seed fully determines the output for a given configuration.

    Attributes:
        seed: Non-negative 64-bit seed
        records_min: Fewest records per page
        records_max: Most records per page
        c_block_probability: Chance that a record carries a C block
        label_probability: Chance that a template slot is labeled
        repeat_probability: Chance that a record reuses one carrier sentence at two
            positions
        sentences: Path of a carrier sentence file (bundled file when None)
    """

    seed: int = 0
    records_min: int = DEFAULT_RECORDS_PER_PAGE[0]
    records_max: int = DEFAULT_RECORDS_PER_PAGE[1]
    c_block_probability: float = DEFAULT_C_BLOCK_PROBABILITY
    label_probability: float = DEFAULT_LABEL_PROBABILITY
    repeat_probability: float = DEFAULT_REPEAT_PROBABILITY
    sentences: str | None = None

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a non-negative 64-bit integer, got {self.seed}")
        if not 1 <= self.records_min <= self.records_max:
            raise ValueError(
                f"records per page must satisfy 1 <= min <= max, "
                f"got {self.records_min}..{self.records_max}"
            )
        validate_probability("c_block_probability", self.c_block_probability)
        validate_probability("label_probability", self.label_probability)
        validate_probability("repeat_probability", self.repeat_probability)


def page_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for one page."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _carriers(
    cfg: GenConfig, sentences: Sequence[tuple[str, ...]], rng: np.random.Generator
) -> list[tuple[str, ...]]:
    chosen = [sentences[int(rng.integers(len(sentences)))] for _ in range(TEMPLATE_CARRIER_COUNT)]
    if TEMPLATE_CARRIER_COUNT >= 2 and rng.random() < cfg.repeat_probability:
        first, second = rng.choice(TEMPLATE_CARRIER_COUNT, size=2, replace=False)
        chosen[int(second)] = chosen[int(first)]
    return chosen


def _record(
    cfg: GenConfig,
    lex: Lexicons,
    labels: Mapping[tuple[str, ...], EntityLabel],
    sentences: Sequence[tuple[str, ...]],
    rng: np.random.Generator,
) -> RecordD:
    carriers = iter(_carriers(cfg, sentences, rng))
    words: list[Word] = []
    values: dict[tuple[str, ...], list[str]] = {}
    for item in RECORD_TEMPLATE:
        if isinstance(item, Carrier):
            words.extend(Word(text) for text in next(carriers))
        elif isinstance(item, Slot):
            value = lex.sample(item.leaf, rng)
            values.setdefault(item.tags, value)
            label = labels[item.tags] if rng.random() < cfg.label_probability else None
            words.extend(Word(text, label) for text in value)
        else:
            words.extend(Word(text) for text in item.split())

    act = str(int(rng.integers(1, 1000)))
    margin = [act, *values[("husband", "family_name")], "et", *values[("wife", "family_name")]]
    c_blocks: tuple[Block, ...] = ()
    if rng.random() < cfg.c_block_probability:
        note = sentences[int(rng.integers(len(sentences)))]
        c_blocks = (Block("C", tuple(Word(text) for text in note)),)
    return RecordD(Block("A", tuple(Word(t) for t in margin)), Block("B", tuple(words)), c_blocks)


def generate_page(
    cfg: GenConfig,
    lex: Lexicons | None = None,
    ont: TagOntology | None = None,
    index: int = 0,
) -> Page:
    """
    Generate one labeled page.

    Labels are only placed in B blocks; A holds the act number and the two family
    names, C holds a carrier sentence.

    Raises:
        OntologyError: If the ontology lacks a tag used by the record template
    """
    ont = ont or default_ontology()
    lex = lex or default_lexicons()
    sentences = sentences_from_path(cfg.sentences)
    labels = {
        item.tags: canonical_label(item.tags, ont)
        for item in RECORD_TEMPLATE
        if isinstance(item, Slot)
    }
    rng = page_rng(cfg.seed, index)
    count = int(rng.integers(cfg.records_min, cfg.records_max + 1))
    records = tuple(_record(cfg, lex, labels, sentences, rng) for _ in range(count))
    return Page(f"synth-{cfg.seed}-{index:05d}", records)


def assign_splits(seed: int, n: int) -> list[str]:
    """
    Split page indexes into train/valid/test by ranking seed-derived hashes.

    ``floor(n * ratio)`` pages go to valid and to test; the rest are train.
    """
    ranked = sorted(
        range(n),
        key=lambda i: hashlib.md5(f"{seed}:{i}".encode(), usedforsecurity=False).hexdigest(),
    )
    n_valid = int(n * SPLIT_RATIOS["valid"])
    n_test = int(n * SPLIT_RATIOS["test"])
    splits = ["train"] * n
    for rank, index in enumerate(ranked):
        if rank < n_valid:
            splits[index] = "valid"
        elif rank < n_valid + n_test:
            splits[index] = "test"
    return splits


def _generate_indexed(args: tuple[GenConfig, Lexicons, TagOntology, int]) -> Page:
    cfg, lex, ont, index = args
    return generate_page(cfg, lex, ont, index)


def generate_corpus(
    cfg: GenConfig,
    n: int,
    out: str | Path,
    lex: Lexicons | None = None,
    ont: TagOntology | None = None,
    jobs: int = DEFAULT_JOBS,
):
    """
    Generate ``n`` pages into ``out`` with a manifest recording splits and the PRNG.

    Output is byte-identical for equal arguments, whatever the number of jobs.

    Returns:
        The written Manifest

    Raises:
        ValueError: If ``n`` is below 1
        CorpusError: If the destination cannot be written
    """
    from .corpus import write_corpus

    if n < 1:
        raise ValueError(f"corpus size must be at least 1, got {n}")
    ont = ont or default_ontology()
    lex = lex or default_lexicons()
    tasks = [(cfg, lex, ont, index) for index in range(n)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            pages = list(pool.map(_generate_indexed, tasks, chunksize=max(1, n // (jobs * 4))))
    else:
        pages = [_generate_indexed(task) for task in tasks]
    logging.info("Generated %d pages with seed %d", n, cfg.seed)
    return write_corpus(out, pages, assign_splits(cfg.seed, n), seed=cfg.seed, prng=PRNG_ALGORITHM)
