"""
Validation utilities and error types shared across the toolkit.

Every domain error is a ``ValueError`` subclass carrying a descriptive message;
lenient code paths report problems as ``Diagnostic`` entries instead of raising.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .constants import LAYOUT_MARKER_CHARS, PUA_FIRST_CODEPOINT, PUA_LAST_CODEPOINT

_TAG_NAME_PATTERN = re.compile(r"^[a-z][a-z0-9]*(_[a-z0-9]+)*$")
_LAYOUT_MARKER_PATTERN = re.compile(r"</?[ABCD]>")
COMBINED_MARKER_PATTERN = re.compile(r"<(?P<name>[a-z][a-z0-9_]*)>$")
_WHITESPACE_PATTERN = re.compile(r"\s")
PRIVATE_USE_PATTERN = re.compile(f"[{chr(PUA_FIRST_CODEPOINT)}-{chr(PUA_LAST_CODEPOINT)}]")


class OntologyError(ValueError):
    """Invalid ontology content, unknown tag, or a label violating level cardinality."""


class DocumentError(ValueError):
    """Malformed interchange document or document model invariant violation."""

    def __init__(
        self, message: str, record_index: int | None = None, word_index: int | None = None
    ):
        location = []
        if record_index is not None:
            location.append(f"record {record_index}")
        if word_index is not None:
            location.append(f"word {word_index}")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)
        self.record_index = record_index
        self.word_index = word_index


class DecodeError(ValueError):
    """Strict decoding of a tagged string failed."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(f"{message} at position {position}" if position is not None else message)
        self.message = message
        self.position = position


class LayoutError(ValueError):
    """Strict layout grammar violation; ``offset`` is a UTF-8 byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(f"{message} at byte offset {offset}" if offset is not None else message)
        self.message = message
        self.offset = offset


class MetricError(ValueError):
    """Metric precondition violated."""


class LexiconError(ValueError):
    """Invalid lexicon or carrier sentence source."""


class CorpusError(ValueError):
    """Corpus directory cannot be read or written."""


@dataclass(frozen=True)
class Diagnostic:
    """One repair applied by a lenient parser."""

    position: int
    message: str

    def to_dict(self) -> dict:
        return {"position": self.position, "message": self.message}


def is_private_use(char: str) -> bool:
    """True when ``char`` lies in the Private Use Area reserved for tag tokens."""
    return PUA_FIRST_CODEPOINT <= ord(char) <= PUA_LAST_CODEPOINT


def validate_tag_name(name: str) -> None:
    """
    Validate a tag identifier.

    Args:
        name: Lowercase snake-case identifier (e.g., "first_name")

    Raises:
        OntologyError: If the name is empty or not lowercase snake-case

    Examples:
        >>> validate_tag_name("first_name")  # Valid
        >>> validate_tag_name("FirstName")  # Raises OntologyError
    """
    if not name or not _TAG_NAME_PATTERN.match(name):
        raise OntologyError(
            f"Invalid tag name: '{name}'. "
            "Tag names must be lowercase snake-case identifiers (e.g., first_name)"
        )


def validate_tag_token(token: str) -> None:
    """
    Validate a serialized tag token.

    Raises:
        OntologyError: If the token is not a single non-space character, or if it is one
            of the characters used by layout and marker syntax
    """
    if not isinstance(token, str) or len(token) != 1:
        raise OntologyError(f"Tag token must be exactly one character, got {token!r}")
    if token.isspace() or token.isalnum():
        raise OntologyError(f"Tag token {token!r} would collide with transcription text")
    if token in LAYOUT_MARKER_CHARS:
        raise OntologyError(f"Tag token {token!r} collides with layout tokens")


def validate_word_text(text: str, reserved: frozenset[str] = frozenset()) -> None:
    """
    Validate the text of a single word.

    Args:
        text: Word text
        reserved: Tag tokens of the active ontology, checked in addition to the
            Private Use Area

    Raises:
        DocumentError: If the word is empty, contains whitespace, a tag token, or a
            layout marker, or if it ends with a combined tag marker such as "<wife>"
    """
    if not text:
        raise DocumentError("word is empty")
    if _WHITESPACE_PATTERN.search(text):
        raise DocumentError(f"word contains whitespace: {text!r}")
    if PRIVATE_USE_PATTERN.search(text) or (reserved and not reserved.isdisjoint(text)):
        raise DocumentError(f"word contains a reserved tag token: {text!r}")
    if "<" not in text:
        return
    if _LAYOUT_MARKER_PATTERN.search(text):
        raise DocumentError(f"word contains a layout marker: {text!r}")
    if COMBINED_MARKER_PATTERN.search(text):
        raise DocumentError(f"word ends with a combined tag marker: {text!r}")


def validate_probability(name: str, value: float) -> None:
    """
    Validate a probability knob.

    Raises:
        ValueError: If ``value`` lies outside [0, 1]
    """
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be between 0 and 1, got {value}")


def validate_threshold(value: float) -> None:
    """
    Validate a CER acceptance threshold.

    Raises:
        MetricError: If the threshold is negative
    """
    if value < 0.0:
        raise MetricError(f"CER threshold must be non-negative, got {value}")
