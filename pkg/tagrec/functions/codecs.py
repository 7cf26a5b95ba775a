"""
Entity tag encodings for labeled word sequences.

Five ways of interleaving entity tags with transcribed words are supported:

1. BEFORE: tag tokens, fine-to-coarse, glued before each labeled word.
2. AFTER: tag tokens, coarse-to-fine, glued after each labeled word.
3. OPEN_CLOSE: every labeled word wrapped in its own open/close markers.
4. OPEN_CLOSE_NESTED: markers open when a tag starts applying and close when it stops.
5. COMBINED_AFTER: one ``<composite_name>`` marker glued after each labeled word.

Decoding runs in STRICT mode (reject anything an encoder would not produce) or LENIENT
mode (repair, never raise, and report each repair as a Diagnostic).
"""

from __future__ import annotations

import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum, IntEnum

from ..models.document import Word, entity_runs
from ..models.ontology import (
    DEFAULT_ONTOLOGY_ID,
    EntityLabel,
    Tag,
    TagOntology,
    canonical_label,
    composite_name,
    default_ontology,
    is_canonical,
    repair_label,
    split_composite,
)
from ..validators import (
    COMBINED_MARKER_PATTERN,
    PRIVATE_USE_PATTERN,
    DecodeError,
    Diagnostic,
    OntologyError,
    is_private_use,
)


class EncodingScheme(IntEnum):
    BEFORE = 1
    AFTER = 2
    OPEN_CLOSE = 3
    OPEN_CLOSE_NESTED = 4
    COMBINED_AFTER = 5


class DecodePolicy(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


@dataclass(frozen=True)
class CodecOptions:
    """
    Rendering options.

    Attributes:
        close_marker: Character after "<" in closing markers: "/" renders "</τ>", a
            backslash renders the "<\\τ>" form of the printed examples
        tag_word_separator: Placed between scheme-1 tag tokens and their word ("" or " ")
    """

    close_marker: str = "/"
    tag_word_separator: str = ""

    def __post_init__(self):
        if self.close_marker not in ("/", "\\"):
            raise ValueError(f"close_marker must be '/' or '\\', got {self.close_marker!r}")
        if self.tag_word_separator not in ("", " "):
            raise ValueError("tag_word_separator must be '' or a single space")


DEFAULT_OPTIONS = CodecOptions()


@dataclass(frozen=True)
class TaggedString:
    """
    Serialized transcript. The scheme is carried out-of-band, never sniffed from text.

    ``layout`` marks strings that also carry the A/B/C/D page grammar.
    """

    text: str
    scheme: EncodingScheme
    ontology_id: str = DEFAULT_ONTOLOGY_ID
    layout: bool = False


@dataclass(frozen=True)
class BioSequence:
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        previous = "O"
        for text, tag in self.pairs:
            if tag.startswith("I-") and previous[2:] != tag[2:]:
                raise ValueError(f"{tag} on {text!r} does not continue an entity")
            previous = tag

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(tag for _, tag in self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


_UNIT = re.compile(r"\S+")
_MARKER = re.compile(r"<([/\\]?)([^\s<>/\\])>")
_COMBINED = re.compile(r"^(?P<text>.*?)" + COMBINED_MARKER_PATTERN.pattern)
_LAYOUT_MARKER = re.compile(r"</?[ABCD]>")


def _open(tag: Tag) -> str:
    return f"<{tag.token}>"


def _close(tag: Tag, options: CodecOptions) -> str:
    return f"<{options.close_marker}{tag.token}>"


def _encode_before(words: Sequence[Word], options: CodecOptions) -> list[str]:
    units = []
    for word in words:
        if word.label is None:
            units.append(word.text)
        else:
            tokens = "".join(tag.token for tag in reversed(word.label.tags))
            units.append(f"{tokens}{options.tag_word_separator}{word.text}")
    return units


def _encode_after(words: Sequence[Word], options: CodecOptions) -> list[str]:
    return [
        word.text + ("".join(tag.token for tag in word.label.tags) if word.label else "")
        for word in words
    ]


def _encode_open_close(words: Sequence[Word], options: CodecOptions) -> list[str]:
    units: list[str] = []
    for word in words:
        if word.label is None:
            units.append(word.text)
            continue
        units.extend(_open(tag) for tag in word.label.tags)
        units.append(word.text)
        units.extend(_close(tag, options) for tag in reversed(word.label.tags))
    return units


def _encode_nested(words: Sequence[Word], options: CodecOptions) -> list[str]:
    units: list[str] = []
    stack: list[Tag] = []
    for word in words:
        wanted = word.label.tags if word.label else ()
        keep = 0
        while keep < len(stack) and stack[keep] in wanted:
            keep += 1
        units.extend(_close(tag, options) for tag in reversed(stack[keep:]))
        del stack[keep:]
        for tag in wanted:
            if tag not in stack:
                units.append(_open(tag))
                stack.append(tag)
        units.append(word.text)
    units.extend(_close(tag, options) for tag in reversed(stack))
    return units


def _encode_combined(words: Sequence[Word], options: CodecOptions) -> list[str]:
    return [
        f"{word.text}<{composite_name(word.label)}>" if word.label else word.text
        for word in words
    ]


_ENCODERS = {
    EncodingScheme.BEFORE: _encode_before,
    EncodingScheme.AFTER: _encode_after,
    EncodingScheme.OPEN_CLOSE: _encode_open_close,
    EncodingScheme.OPEN_CLOSE_NESTED: _encode_nested,
    EncodingScheme.COMBINED_AFTER: _encode_combined,
}


def encode(
    words: Sequence[Word],
    scheme: EncodingScheme,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> TaggedString:
    """
    Serialize labeled words under one encoding scheme.

    Word units are separated by single spaces; markers of schemes 3 and 4 are
    space-separated units of their own. Unlabeled words serialize as bare text.

    Raises:
        OntologyError: If a label is not canonical for ``ont``
    """
    ont = ont or default_ontology()
    scheme = EncodingScheme(scheme)
    for i, word in enumerate(words):
        if word.label is not None and not is_canonical(word.label, ont):
            raise OntologyError(f"non-canonical label on word {i} ({word.text!r})")
    return TaggedString(" ".join(_ENCODERS[scheme](words, options)), scheme, ont.ontology_id)


class _Decoder:
    """Single-pass decoder; ``problem`` raises in STRICT mode and records otherwise."""

    def __init__(self, policy: DecodePolicy, ont: TagOntology, options: CodecOptions):
        self.strict = DecodePolicy(policy) is DecodePolicy.STRICT
        self.ont = ont
        self.options = options
        self.tokens = ont.tokens
        self.diagnostics: list[Diagnostic] = []
        self.words: list[Word] = []
        # marker schemes: open tags that already wrap a word, tags opened since the last word
        self.filled: set[Tag] = set()
        self.opened: list[Tag] = []

    def problem(self, message: str, position: int) -> None:
        if self.strict:
            raise DecodeError(message, position)
        self.diagnostics.append(Diagnostic(position, message))

    def label(self, tags: Sequence[Tag], position: int) -> EntityLabel | None:
        if not tags:
            return None
        if self.strict:
            try:
                return canonical_label(tags, self.ont)
            except OntologyError as e:
                raise DecodeError(str(e), position) from e
        label, repairs = repair_label(tags, self.ont)
        self.diagnostics.extend(Diagnostic(position, repair) for repair in repairs)
        return label

    def clean(self, text: str, position: int) -> str:
        """Word text with stray tag tokens and layout or combined markers removed (lenient)."""
        if "<" in text or not self.tokens.isdisjoint(text) or PRIVATE_USE_PATTERN.search(text):
            return self.strip(text, position)
        return text

    def strip(self, text: str, position: int) -> str:
        kept = []
        for offset, ch in enumerate(text):
            if self.ont.tag_by_token(ch) is not None:
                self.problem(f"tag token U+{ord(ch):04X} inside word", position + offset)
            elif is_private_use(ch):
                self.problem(f"unknown token U+{ord(ch):04X}", position + offset)
            else:
                kept.append(ch)
        cleaned = "".join(kept)
        found: dict[str, None] = {}
        while True:
            if _LAYOUT_MARKER.search(cleaned):
                found.setdefault("layout marker inside word")
                cleaned = _LAYOUT_MARKER.sub("", cleaned)
            elif COMBINED_MARKER_PATTERN.search(cleaned):
                found.setdefault("combined tag marker inside word")
                cleaned = COMBINED_MARKER_PATTERN.sub("", cleaned)
            else:
                break
        for message in found:
            self.problem(message, position)
        return cleaned

    def emit(self, text: str, label: EntityLabel | None) -> None:
        self.words.append(Word(text, label))

    def split_tokens(self, chars: str, position: int) -> list[Tag]:
        tags = []
        for offset, ch in enumerate(chars):
            tag = self.ont.tag_by_token(ch)
            if tag is None:
                self.problem(f"unknown token U+{ord(ch):04X}", position + offset)
            else:
                tags.append(tag)
        return tags

    def check_order(self, tags: list[Tag], label: EntityLabel | None, reverse: bool, pos: int):
        if not self.strict or label is None:
            return
        expected = list(reversed(label.tags)) if reverse else list(label.tags)
        if tags != expected:
            if len(set(tags)) != len(tags):
                raise DecodeError("duplicate component", pos)
            raise DecodeError("tag tokens out of canonical order", pos)

    def is_token(self, ch: str) -> bool:
        return self.ont.tag_by_token(ch) is not None or is_private_use(ch)

    def decode_before(self, text: str) -> None:
        pending: list[Tag] = []
        pending_at = 0
        for match in _UNIT.finditer(text):
            unit, pos = match.group(), match.start()
            split = 0
            while split < len(unit) and self.is_token(unit[split]):
                split += 1
            tags = self.split_tokens(unit[:split], pos)
            body = self.clean(unit[split:], pos + split)
            if not body:
                if tags and not pending:
                    pending_at = pos
                if self.options.tag_word_separator != " ":
                    self.problem("tag token adjacent to nothing", pos)
                pending.extend(tags)
                continue
            tags, pending = pending + tags, []
            label = self.label(tags, pos)
            self.check_order(tags, label, reverse=True, pos=pos)
            self.emit(body, label)
        if pending:
            self.problem("tag token adjacent to nothing", pending_at)

    def decode_after(self, text: str) -> None:
        for match in _UNIT.finditer(text):
            unit, pos = match.group(), match.start()
            split = len(unit)
            while split > 0 and self.is_token(unit[split - 1]):
                split -= 1
            tags = self.split_tokens(unit[split:], pos + split)
            body = self.clean(unit[:split], pos)
            if not body:
                self.problem("tag token adjacent to nothing", pos)
                continue
            label = self.label(tags, pos)
            self.check_order(tags, label, reverse=False, pos=pos)
            self.emit(body, label)

    def decode_combined(self, text: str) -> None:
        for match in _UNIT.finditer(text):
            unit, pos = match.group(), match.start()
            combined = _COMBINED.match(unit)
            label = None
            body = unit
            if combined is not None:
                body = combined.group("text")
                label = self.combined_label(combined.group("name"), pos + len(body))
            body = self.clean(body, pos)
            if not body:
                if combined is not None:
                    self.problem("tag marker adjacent to nothing", pos)
                continue
            self.emit(body, label)

    def combined_label(self, name: str, pos: int) -> EntityLabel | None:
        tags, unknown = split_composite(name, self.ont)
        for part in unknown:
            self.problem(f"unknown component '{part}' in <{name}>", pos)
        if len(set(tags)) != len(tags):
            self.problem(f"duplicate component in <{name}>", pos)
        return self.label(tags, pos)

    def decode_markers(self, text: str, per_word: bool) -> None:
        """
        Schemes 3 and 4.

        With ``per_word`` (scheme 3) STRICT also requires every group of open markers to
        wrap exactly one word before it closes.
        """
        stack: list[Tag] = []
        for match in _UNIT.finditer(text):
            unit, pos = match.group(), match.start()
            cursor = 0
            markers = [m for m in _MARKER.finditer(unit) if self.is_token(m.group(2))]
            if markers and (len(markers) > 1 or markers[0].span() != (0, len(unit))):
                self.problem("marker not separated by a space", pos)
            for marker in markers:
                if marker.start() > cursor:
                    self.marker_word(unit[cursor : marker.start()], pos + cursor, stack, per_word)
                cursor = marker.end()
                self.marker(marker, pos + marker.start(), stack, per_word)
            if cursor < len(unit):
                self.marker_word(unit[cursor:], pos + cursor, stack, per_word)
        for tag in stack:
            self.problem(f"unclosed marker {tag.name} at end of text", len(text))

    def marker_word(self, raw: str, pos: int, stack: list[Tag], per_word: bool) -> None:
        body = self.clean(raw, pos)
        if not body:
            return
        if self.strict and per_word and self.filled:
            raise DecodeError("markers wrap more than one word", pos)
        label = self.label(list(dict.fromkeys(stack)), pos)
        if self.strict and label is not None:
            opened = set(self.opened)
            if self.opened != [tag for tag in label.tags if tag in opened]:
                raise DecodeError("tag tokens out of canonical order", pos)
        self.filled.update(stack)
        self.opened = []
        self.emit(body, label)

    def marker(self, marker: re.Match, pos: int, stack: list[Tag], per_word: bool) -> None:
        closing, token = marker.group(1), marker.group(2)
        tag = self.ont.tag_by_token(token)
        if tag is None:
            self.problem(f"unknown token U+{ord(token):04X}", pos)
            return
        if not closing:
            if tag in stack:
                self.problem(f"marker {tag.name} opened twice", pos)
                return
            if self.strict and per_word and self.filled:
                raise DecodeError(f"marker {tag.name} opens before the previous word closed", pos)
            stack.append(tag)
            self.opened.append(tag)
            return
        if closing != self.options.close_marker and self.strict:
            raise DecodeError(f"closing marker for {tag.name} uses {closing!r}", pos)
        if stack and stack[-1] == tag:
            stack.pop()
        elif tag in stack:
            self.problem(f"misnested closing marker {tag.name}", pos)
            del stack[len(stack) - 1 - stack[::-1].index(tag)]
        else:
            self.problem(f"orphan closing marker {tag.name}", pos)
            return
        if tag in self.filled:
            self.filled.discard(tag)
        else:
            self.problem("tag token adjacent to nothing", pos)
            if tag in self.opened:
                self.opened.remove(tag)


def decode_with_diagnostics(
    ts: TaggedString,
    policy: DecodePolicy = DecodePolicy.LENIENT,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> tuple[list[Word], list[Diagnostic]]:
    """
    Decode a tagged string and return the repairs applied along with the words.

    Raises:
        DecodeError: In STRICT mode only, on an unknown token, orphan or misnested close,
            unclosed open at end, cardinality violation, or a tag adjacent to nothing
    """
    ont = ont or default_ontology()
    if ts.layout:
        from .layout import parse_page_with_diagnostics

        page, diagnostics = parse_page_with_diagnostics(ts.text, policy, ts.scheme, ont, options)
        return list(page.words), diagnostics

    decoder = _Decoder(policy, ont, options)
    scheme = EncodingScheme(ts.scheme)
    if scheme is EncodingScheme.BEFORE:
        decoder.decode_before(ts.text)
    elif scheme is EncodingScheme.AFTER:
        decoder.decode_after(ts.text)
    elif scheme is EncodingScheme.COMBINED_AFTER:
        decoder.decode_combined(ts.text)
    else:
        decoder.decode_markers(ts.text, per_word=scheme is EncodingScheme.OPEN_CLOSE)
    if decoder.diagnostics:
        logging.debug("Lenient decode applied %d repairs", len(decoder.diagnostics))
    return decoder.words, decoder.diagnostics


def decode(
    ts: TaggedString,
    policy: DecodePolicy = DecodePolicy.LENIENT,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> list[Word]:
    """Decode a tagged string into labeled words (see ``decode_with_diagnostics``)."""
    words, _ = decode_with_diagnostics(ts, policy, ont, options)
    return words


def convert(
    ts: TaggedString,
    to: EncodingScheme,
    policy: DecodePolicy = DecodePolicy.STRICT,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> TaggedString:
    """Re-encode ``ts`` under scheme ``to``; same-scheme STRICT conversion canonicalizes."""
    ont = ont or default_ontology()
    if ts.layout:
        from .layout import parse_page, serialize_page

        page = parse_page(ts.text, policy, ts.scheme, ont, options)
        text = serialize_page(page, to, ont, options)
        return TaggedString(text, EncodingScheme(to), ont.ontology_id, layout=True)
    return encode(decode(ts, policy, ont, options), to, ont, options)


def strip_tags(
    ts: TaggedString, ont: TagOntology | None = None, options: CodecOptions = DEFAULT_OPTIONS
) -> str:
    """Tag-free text of any tagged string, words separated by single spaces."""
    return " ".join(word.text for word in decode(ts, DecodePolicy.LENIENT, ont, options))


def count_markers(ts: TaggedString, ont: TagOntology | None = None) -> int:
    """Number of tag markers in ``ts``: tokens for schemes 1-2, bracketed markers otherwise."""
    ont = ont or default_ontology()
    scheme = EncodingScheme(ts.scheme)
    if scheme in (EncodingScheme.BEFORE, EncodingScheme.AFTER):
        return sum(1 for ch in ts.text if ont.tag_by_token(ch) is not None)
    if scheme is EncodingScheme.COMBINED_AFTER:
        return sum(1 for unit in ts.text.split() if _COMBINED.match(unit))
    return sum(1 for m in _MARKER.finditer(ts.text) if ont.tag_by_token(m.group(2)) is not None)


def to_bio(words: Sequence[Word]) -> BioSequence:
    """Beginning/Inside/Outside tags over maximal runs of identical labels."""
    tags = ["O"] * len(words)
    for start, end, label in entity_runs(words):
        name = composite_name(label)
        tags[start] = f"B-{name}"
        for i in range(start + 1, end):
            tags[i] = f"I-{name}"
    return BioSequence(tuple(zip((w.text for w in words), tags)))
