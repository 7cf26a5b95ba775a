"""
Page layout grammar.

A serialized page is a sequence of records, one per line::

    <D><A>595 Jegou et Boulin</A><B>...</B><C>...</C></D>

Each record holds exactly one A block, one B block and any number of C blocks, in that
order. Block contents are plain words, or words tagged under an entity encoding scheme.
Errors and diagnostics report UTF-8 byte offsets into the page string.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

from ..models.document import Block, Page, RecordD, Word
from ..models.ontology import TagOntology, default_ontology
from ..validators import DecodeError, Diagnostic, DocumentError, LayoutError
from .codecs import (
    DEFAULT_OPTIONS,
    CodecOptions,
    DecodePolicy,
    EncodingScheme,
    TaggedString,
    decode_with_diagnostics,
    encode,
)


class LayoutToken(Enum):
    OPEN_A = "<A>"
    CLOSE_A = "</A>"
    OPEN_B = "<B>"
    CLOSE_B = "</B>"
    OPEN_C = "<C>"
    CLOSE_C = "</C>"
    OPEN_D = "<D>"
    CLOSE_D = "</D>"

    @property
    def kind(self) -> str:
        return self.value.strip("</>")

    @property
    def closing(self) -> bool:
        return self.value.startswith("</")


_LAYOUT_TOKEN = re.compile(r"</?[ABCD]>")


def _block_content(
    block: Block,
    entity_scheme: EncodingScheme | None,
    ont: TagOntology,
    options: CodecOptions,
) -> str:
    if entity_scheme is None:
        return " ".join(word.text for word in block.words)
    return encode(block.words, entity_scheme, ont, options).text


def serialize_page(
    page: Page,
    entity_scheme: EncodingScheme | None = None,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
) -> str:
    """
    Render a page in the layout grammar, records separated by single newlines.

    Args:
        page: Page to render
        entity_scheme: Encoding applied to block contents; plain words when None
        ont: Ontology supplying tag tokens
        options: Codec rendering options
    """
    ont = ont or default_ontology()
    lines = []
    for record in page.records:
        parts = ["<D>"]
        for block in record.blocks:
            content = _block_content(block, entity_scheme, ont, options)
            parts.append(f"<{block.kind}>{content}</{block.kind}>")
        parts.append("</D>")
        lines.append("".join(parts))
    return "\n".join(lines)


@dataclass
class _OpenRecord:
    offset: int
    synthetic: bool = False
    blocks: dict[str, list[Block]] = field(default_factory=lambda: {"A": [], "B": [], "C": []})

    @property
    def seen(self) -> set[str]:
        return {kind for kind, blocks in self.blocks.items() if blocks}


class _PageParser:
    """Event-driven parser over layout tokens; ``problem`` raises in STRICT mode."""

    def __init__(
        self,
        text: str,
        policy: DecodePolicy,
        entity_scheme: EncodingScheme | None,
        ont: TagOntology,
        options: CodecOptions,
    ):
        self.text = text
        self.strict = DecodePolicy(policy) is DecodePolicy.STRICT
        self.entity_scheme = entity_scheme
        self.ont = ont
        self.options = options
        self.diagnostics: list[Diagnostic] = []
        self.records: list[RecordD] = []
        self.record: _OpenRecord | None = None
        self.block: tuple[str, int] | None = None  # kind, content start (char index)

    def offset(self, char_index: int) -> int:
        return len(self.text[:char_index].encode("utf-8"))

    def problem(self, message: str, char_index: int) -> None:
        if self.strict:
            raise LayoutError(message, self.offset(char_index))
        self.diagnostics.append(Diagnostic(self.offset(char_index), message))

    def parse(self) -> list[RecordD]:
        cursor = 0
        for match in _LAYOUT_TOKEN.finditer(self.text):
            self.between(cursor, match.start())
            self.token(LayoutToken(match.group()), match.start())
            cursor = match.end()
        self.between(cursor, len(self.text))
        end = len(self.text)
        if self.block is not None:
            self.problem(f"unclosed block {self.block[0]} at end of input", end)
            self.close_block(end)
        if self.record is not None:
            if not self.record.synthetic:
                self.problem("unclosed record at end of input", end)
            self.finish_record(end)
        if not self.records:
            self.problem("page has no records", 0)
        return self.records

    def between(self, start: int, end: int) -> None:
        chunk = self.text[start:end]
        if self.block is not None or not chunk.strip():
            return
        self.problem("text outside any block", start + len(chunk) - len(chunk.lstrip()))

    def token(self, token: LayoutToken, at: int) -> None:
        if token is LayoutToken.OPEN_D:
            if self.block is not None:
                self.problem(f"unclosed block {self.block[0]}", at)
                self.close_block(at)
            if self.record is not None:
                if not self.record.synthetic:
                    self.problem("nested record", at)
                self.finish_record(at)
            self.record = _OpenRecord(at)
        elif token is LayoutToken.CLOSE_D:
            if self.block is not None:
                self.problem(f"unclosed block {self.block[0]}", at)
                self.close_block(at)
            if self.record is None:
                self.problem("stray </D>", at)
                return
            self.finish_record(at)
        elif not token.closing:
            self.open_block(token.kind, at)
        elif self.block is None:
            self.problem(f"stray {token.value}", at)
        elif self.block[0] != token.kind:
            self.problem(f"{token.value} closes block {self.block[0]}", at)
            self.close_block(at)
        else:
            self.close_block(at)

    def open_block(self, kind: str, at: int) -> None:
        if self.block is not None:
            self.problem(f"unclosed block {self.block[0]}", at)
            self.close_block(at)
        if self.record is None:
            self.problem(f"block {kind} outside any record", at)
            self.record = _OpenRecord(at, synthetic=True)
        seen = self.record.seen
        if self.strict:
            if kind in ("A", "B") and kind in seen:
                raise LayoutError(f"two {kind} blocks in one record", self.offset(at))
            if kind in ("B", "C") and "A" not in seen:
                raise LayoutError("record missing block A", self.offset(at))
            if kind == "C" and "B" not in seen:
                raise LayoutError("record missing block B", self.offset(at))
        elif kind in ("A", "B") and kind in seen:
            self.problem(f"duplicate block {kind} merged", at)
        self.block = (kind, at + len(kind) + 2)

    def close_block(self, at: int) -> None:
        kind, start = self.block
        self.block = None
        self.record.blocks[kind].append(Block(kind, tuple(self.words(start, at))))

    def words(self, start: int, end: int) -> list[Word]:
        content = self.text[start:end]
        if self.entity_scheme is None:
            words = []
            for match in re.finditer(r"\S+", content):
                try:
                    words.append(Word(match.group()))
                except DocumentError as e:
                    self.problem(str(e), start + match.start())
            return words

        ts = TaggedString(content, EncodingScheme(self.entity_scheme), self.ont.ontology_id)
        try:
            words, diagnostics = decode_with_diagnostics(
                ts, DecodePolicy.STRICT if self.strict else DecodePolicy.LENIENT,
                self.ont, self.options,
            )
        except DecodeError as e:
            raise LayoutError(e.message, self.offset(start + (e.position or 0))) from e
        self.diagnostics.extend(
            Diagnostic(self.offset(start + d.position), d.message) for d in diagnostics
        )
        return words

    def finish_record(self, at: int) -> None:
        record, self.record = self.record, None
        blocks = record.blocks
        for kind in ("A", "B"):
            if not blocks[kind]:
                if not (kind == "A" and record.synthetic):
                    self.problem(f"record missing block {kind}", at)
                blocks[kind].append(Block(kind))
        a = Block("A", tuple(w for blk in blocks["A"] for w in blk.words))
        b = Block("B", tuple(w for blk in blocks["B"] for w in blk.words))
        self.records.append(RecordD(a, b, tuple(blocks["C"])))


def parse_page_with_diagnostics(
    text: str,
    policy: DecodePolicy = DecodePolicy.STRICT,
    entity_scheme: EncodingScheme | None = None,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
    page_id: str = "",
) -> tuple[Page, list[Diagnostic]]:
    """
    Parse a serialized page, returning the repairs applied in LENIENT mode.

    LENIENT recovery closes a missing close at the next open of equal or outer scope (or at
    end of input), wraps blocks found outside any record into a synthetic record with an
    empty A block, drops stray closes and stray text, and fills missing A/B blocks.

    Raises:
        LayoutError: In STRICT mode, on the first grammar violation (with byte offset)
    """
    parser = _PageParser(text, policy, entity_scheme, ont or default_ontology(), options)
    records = parser.parse()
    if parser.diagnostics:
        logging.info("Page %s: %d layout repairs", page_id or "<unnamed>", len(parser.diagnostics))
    return Page(page_id, tuple(records)), parser.diagnostics


def parse_page(
    text: str,
    policy: DecodePolicy = DecodePolicy.STRICT,
    entity_scheme: EncodingScheme | None = None,
    ont: TagOntology | None = None,
    options: CodecOptions = DEFAULT_OPTIONS,
    page_id: str = "",
) -> Page:
    """Parse a serialized page (see ``parse_page_with_diagnostics``)."""
    page, _ = parse_page_with_diagnostics(text, policy, entity_scheme, ont, options, page_id)
    return page
