"""
Hierarchical tag vocabulary and entity label composition.

An entity label is a composite of sub-element tags drawn from four levels: the person
concerned (level 1), the relative (level 2), the event or place kind (level 3) and the
information category (level 4). "City of residence of the husband's parents" is the
label (husband; father, mother; residence; city).
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

from ..constants import (
    DEFAULT_LEVEL_CARDINALITY,
    ONTOLOGY_LEVELS,
    TOKEN_BASE_CODEPOINT,
)
from ..validators import OntologyError, validate_tag_name, validate_tag_token

# (name, level, display) in declaration order; declaration order is the canonical
# intra-level order.
DEFAULT_TAGS: tuple[tuple[str, int, str], ...] = (
    ("administrative", 1, "Administrative"),
    ("husband", 1, "Husband"),
    ("wife", 1, "Wife"),
    ("witness", 1, "Witness"),
    ("father", 2, "Father"),
    ("mother", 2, "Mother"),
    ("ex_husband", 2, "Ex-husband"),
    ("birth", 3, "Birth"),
    ("residence", 3, "Residence"),
    ("first_name", 4, "First name"),
    ("family_name", 4, "Family name"),
    ("age", 4, "Age"),
    ("occupation", 4, "Occupation"),
    ("street_number", 4, "Street number"),
    ("street_type", 4, "Street type"),
    ("street_name", 4, "Street name"),
    ("city", 4, "City"),
    ("departement", 4, "Département"),
    ("country", 4, "Country"),
    ("day", 4, "Day"),
    ("month", 4, "Month"),
    ("year", 4, "Year"),
    ("hour", 4, "Hour"),
    ("minute", 4, "Minute"),
)

DEFAULT_ONTOLOGY_ID = "default"


@dataclass(frozen=True)
class Tag:
    """One sub-element of the hierarchy and its serialized token."""

    id: int
    name: str
    level: int
    token: str
    display: str


@dataclass(frozen=True)
class EntityLabel:
    """
    Canonical composite of sub-element tags, stored coarse-to-fine.

    Build labels with ``canonical_label`` or ``parse_composite``; the constructor does
    not validate.
    """

    tags: tuple[Tag, ...]

    @property
    def components(self) -> tuple[int, ...]:
        return tuple(tag.id for tag in self.tags)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(tag.name for tag in self.tags)

    @property
    def leaf(self) -> Tag:
        """The finest (level-4) component."""
        return self.tags[-1]

    def __str__(self) -> str:
        return composite_name(self)


@dataclass(frozen=True)
class TagOntology:
    """
    Immutable, validated tag vocabulary.

    ``level_cardinality`` maps each level to the (min, max) number of components a
    canonical label carries at that level.
    """

    tags: tuple[Tag, ...]
    level_cardinality: tuple[tuple[int, int, int], ...]
    ontology_id: str = DEFAULT_ONTOLOGY_ID
    _by_id: dict[int, Tag] = field(init=False, repr=False, compare=False)
    _by_name: dict[str, Tag] = field(init=False, repr=False, compare=False)
    _by_token: dict[str, Tag] = field(init=False, repr=False, compare=False)
    _order: dict[int, int] = field(init=False, repr=False, compare=False)
    _labels: dict[tuple, EntityLabel] = field(init=False, repr=False, compare=False)
    _composites: dict[str, tuple] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {t.id: t for t in self.tags})
        object.__setattr__(self, "_by_name", {t.name: t for t in self.tags})
        object.__setattr__(self, "_by_token", {t.token: t for t in self.tags})
        object.__setattr__(self, "_order", {t.id: i for i, t in enumerate(self.tags)})
        object.__setattr__(self, "_labels", {})
        object.__setattr__(self, "_composites", {})

    @property
    def level_counts(self) -> dict[int, int]:
        counts = dict.fromkeys(ONTOLOGY_LEVELS, 0)
        for tag in self.tags:
            counts[tag.level] += 1
        return counts

    @property
    def tokens(self) -> frozenset[str]:
        return frozenset(self._by_token)

    @property
    def layout_tokens(self) -> tuple[str, ...]:
        from ..functions.layout import LayoutToken

        return tuple(marker.value for marker in LayoutToken)

    def cardinality(self, level: int) -> tuple[int, int]:
        for lvl, low, high in self.level_cardinality:
            if lvl == level:
                return low, high
        return DEFAULT_LEVEL_CARDINALITY[level]

    def tag(self, name: str) -> Tag:
        try:
            return self._by_name[name]
        except KeyError:
            raise OntologyError(f"unknown tag name '{name}'") from None

    def tag_by_id(self, tag_id: int) -> Tag:
        try:
            return self._by_id[tag_id]
        except KeyError:
            raise OntologyError(f"unknown tag id {tag_id}") from None

    def tag_by_token(self, token: str) -> Tag | None:
        return self._by_token.get(token)

    def sort_key(self, tag: Tag) -> tuple[int, int]:
        return tag.level, self._order[tag.id]

    def has_name(self, name: str) -> bool:
        return name in self._by_name


def _parse_cardinality(raw: Mapping[str, Any] | None) -> tuple[tuple[int, int, int], ...]:
    merged = dict(DEFAULT_LEVEL_CARDINALITY)
    for key, bounds in (raw or {}).items():
        level = int(key)
        if level not in ONTOLOGY_LEVELS:
            raise OntologyError(f"level_cardinality names level {level} outside 1..4")
        low, high = (int(b) for b in bounds)
        if low < 0 or high < low:
            raise OntologyError(f"invalid cardinality [{low}, {high}] for level {level}")
        merged[level] = (low, high)
    return tuple((level, *merged[level]) for level in ONTOLOGY_LEVELS)


def load_ontology(
    source: str | bytes | Mapping[str, Any], ontology_id: str = "custom"
) -> TagOntology:
    """
    Build a validated ontology from an ontology document.

    Args:
        source: JSON text (or already-parsed mapping) with a ``tags`` array of
            ``{id, name, level, token, display}`` objects and an optional
            ``level_cardinality`` mapping of level -> [min, max]. ``token`` and
            ``display`` may be omitted; tokens then default to consecutive Private Use
            Area codepoints in declaration order.
        ontology_id: Identifier recorded on tagged strings produced with this ontology

    Returns:
        TagOntology with tags in declaration order.

    Raises:
        OntologyError: On malformed JSON, duplicate id/name/token, a level outside 1..4,
            or a token colliding with layout tokens
    """
    if isinstance(source, (str, bytes)):
        try:
            document = json.loads(source)
        except json.JSONDecodeError as e:
            raise OntologyError(f"ontology is not valid JSON: {e!s}") from e
    else:
        document = source

    raw_tags = document.get("tags") if isinstance(document, Mapping) else None
    if not isinstance(raw_tags, list) or not raw_tags:
        raise OntologyError("ontology must declare a non-empty 'tags' array")

    tags: list[Tag] = []
    seen_ids: set[int] = set()
    seen_names: set[str] = set()
    seen_tokens: set[str] = set()
    for index, raw in enumerate(raw_tags):
        try:
            tag_id = int(raw.get("id", index + 1))
            name = raw["name"]
            level = int(raw["level"])
        except (AttributeError, KeyError, TypeError, ValueError) as e:
            raise OntologyError(f"tag entry {index} is malformed: {e!s}") from e
        token = raw.get("token") or chr(TOKEN_BASE_CODEPOINT + index)
        display = raw.get("display") or name.replace("_", " ").capitalize()

        validate_tag_name(name)
        validate_tag_token(token)
        if level not in ONTOLOGY_LEVELS:
            raise OntologyError(f"tag '{name}' has level {level} outside 1..4")
        if tag_id in seen_ids:
            raise OntologyError(f"duplicate id {tag_id}")
        if name in seen_names:
            raise OntologyError(f"duplicate name '{name}'")
        if token in seen_tokens:
            raise OntologyError(f"duplicate token U+{ord(token):04X} on tag '{name}'")
        seen_ids.add(tag_id)
        seen_names.add(name)
        seen_tokens.add(token)
        tags.append(Tag(id=tag_id, name=name, level=level, token=token, display=display))

    ontology = TagOntology(
        tags=tuple(tags),
        level_cardinality=_parse_cardinality(document.get("level_cardinality")),
        ontology_id=str(document.get("id", ontology_id)),
    )
    logging.debug(
        "Loaded ontology %s with level counts %s", ontology.ontology_id, ontology.level_counts
    )
    return ontology


@lru_cache(maxsize=1)
def default_ontology() -> TagOntology:
    """The built-in 24-tag ontology (4 + 3 + 2 + 15 tags)."""
    document = {
        "id": DEFAULT_ONTOLOGY_ID,
        "tags": [
            {"id": i + 1, "name": name, "level": level, "display": display}
            for i, (name, level, display) in enumerate(DEFAULT_TAGS)
        ],
    }
    return load_ontology(document)


def ontology_from_path(path: str | Path | None) -> TagOntology:
    """Load the ontology at ``path``, or the built-in default when ``path`` is None."""
    if path is None:
        return default_ontology()
    logging.info("Loading ontology from %s", path)
    return load_ontology(Path(path).read_text(encoding="utf-8"), ontology_id=Path(path).stem)


def _check_cardinality(tags: list[Tag], ont: TagOntology) -> None:
    for level in ONTOLOGY_LEVELS:
        count = sum(1 for tag in tags if tag.level == level)
        low, high = ont.cardinality(level)
        if count < low:
            raise OntologyError(f"missing level-{level} component")
        if count > high:
            raise OntologyError(
                f"too many level-{level} components ({count}, at most {high} allowed)"
            )


def canonical_label(tags: Iterable[int | str | Tag], ont: TagOntology) -> EntityLabel:
    """
    Sort and validate a set of sub-element tags into a canonical label.

    Args:
        tags: Tag ids, names or Tag objects, in any order
        ont: Ontology the tags belong to

    Returns:
        EntityLabel ordered by level, then declaration order.

    Raises:
        OntologyError: On an empty set, an unknown tag, or a cardinality violation

    Examples:
        >>> canonical_label({"first_name", "father", "wife"}, ont).names
        ('wife', 'father', 'first_name')
    """
    key = tuple(tags)
    label = ont._labels.get(key)
    if label is not None:
        return label
    resolved = {_resolve(tag, ont) for tag in key}
    if not resolved:
        raise OntologyError("label has no components")
    ordered = sorted(resolved, key=ont.sort_key)
    _check_cardinality(ordered, ont)
    label = ont._labels[key] = EntityLabel(tuple(ordered))
    return label


def _resolve(tag: int | str | Tag, ont: TagOntology) -> Tag:
    if isinstance(tag, Tag):
        return tag
    if isinstance(tag, str):
        return ont.tag(tag)
    return ont.tag_by_id(tag)


@lru_cache(maxsize=4096)
def is_canonical(label: EntityLabel, ont: TagOntology) -> bool:
    try:
        return canonical_label(label.tags, ont) == label
    except OntologyError:
        return False


def composite_name(label: EntityLabel) -> str:
    """Underscore-joined component names, coarse-to-fine (e.g. "wife_father_first_name")."""
    return "_".join(label.names)


def split_composite(name: str, ont: TagOntology) -> tuple[list[Tag], list[str]]:
    """
    Split an underscore-joined composite into tags, longest tag name first.

    Tag names themselves contain underscores (e.g. "first_name"), so at each position
    the longest matching name wins.

    Returns:
        (tags in order of appearance, unknown name parts)
    """
    cached = ont._composites.get(name)
    if cached is not None:
        return list(cached[0]), list(cached[1])
    parts = name.split("_")
    found: list[Tag] = []
    unknown: list[str] = []
    i = 0
    while i < len(parts):
        for j in range(len(parts), i, -1):
            candidate = "_".join(parts[i:j])
            if ont.has_name(candidate):
                found.append(ont.tag(candidate))
                i = j
                break
        else:
            unknown.append(parts[i])
            i += 1
    ont._composites[name] = (tuple(found), tuple(unknown))
    return found, unknown


def parse_composite(name: str, ont: TagOntology) -> EntityLabel:
    """
    Inverse of ``composite_name``.

    Raises:
        OntologyError: On an unknown or duplicate component, or a cardinality violation
    """
    found, unknown = split_composite(name, ont)
    if unknown:
        raise OntologyError(f"unknown component '{unknown[0]}' in '{name}'")
    for i, tag in enumerate(found):
        if tag in found[:i]:
            raise OntologyError(f"duplicate component '{tag.name}' in '{name}'")
    return canonical_label(found, ont)


def repair_label(tags: Iterable[Tag], ont: TagOntology) -> tuple[EntityLabel | None, list[str]]:
    """
    Best-effort canonicalization used by lenient decoding.

    Tags are considered in arrival order; a tag that would exceed its level's maximum is
    dropped (the newest conflicting tag loses). When a level minimum is still unmet the
    whole label is dropped.

    Returns:
        (label or None, human-readable list of repairs applied)
    """
    key = tuple(tags)
    label = ont._labels.get(key)
    if label is not None:
        return label, []
    kept: list[Tag] = []
    repairs: list[str] = []
    for tag in key:
        if tag in kept:
            continue
        _, high = ont.cardinality(tag.level)
        if sum(1 for t in kept if t.level == tag.level) >= high:
            repairs.append(f"dropped conflicting level-{tag.level} tag '{tag.name}'")
            continue
        kept.append(tag)
    if not kept:
        return None, repairs
    try:
        return canonical_label(kept, ont), repairs
    except OntologyError as e:
        repairs.append(f"dropped label {'_'.join(t.name for t in kept)}: {e!s}")
        return None, repairs


def describe_ontology(ont: TagOntology) -> str:
    """Fixed-width listing of the hierarchy, one tag per row, grouped by level."""
    rows = ["level  id  token   name            display"]
    for tag in sorted(ont.tags, key=ont.sort_key):
        rows.append(
            f"{tag.level:>5}  {tag.id:>2}  U+{ord(tag.token):04X}  {tag.name:<14}  {tag.display}"
        )
    counts = ", ".join(f"L{level}={count}" for level, count in ont.level_counts.items())
    rows.append(f"{len(ont.tags)} tags ({counts})")
    return "\n".join(rows)
