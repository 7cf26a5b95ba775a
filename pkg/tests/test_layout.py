"""Tests for the A/B/C/D page layout grammar."""

import pytest

from tagrec.functions.codecs import DecodePolicy, EncodingScheme
from tagrec.functions.layout import (
    LayoutToken,
    parse_page,
    parse_page_with_diagnostics,
    serialize_page,
)
from tagrec.models.document import plain_text
from tagrec.validators import LayoutError
from tests.conftest import APPENDIX_PAGE, APPENDIX_PAGE_WRAPPED

STRICT = DecodePolicy.STRICT
LENIENT = DecodePolicy.LENIENT


class TestLayoutToken:
    """Tests for the LayoutToken enum."""

    @pytest.mark.pure
    def test_kind_and_closing(self):
        assert LayoutToken.CLOSE_B.kind == "B"
        assert LayoutToken.CLOSE_B.closing
        assert not LayoutToken.OPEN_D.closing
        assert len(LayoutToken) == 8


class TestAppendixPage:
    """The published two-record annotation parses and re-serializes unchanged."""

    @pytest.mark.pure
    def test_parses_into_two_records(self, ont):
        page = parse_page(APPENDIX_PAGE, STRICT, ont=ont)
        assert len(page.records) == 2
        for record in page.records:
            assert record.a.words
            assert record.b.words
            assert len(record.c) == 1
        assert plain_text(page.records[0].a) == "595 Jegou et Boulin"
        assert plain_text(page.records[1].a) == "787 Delagarde et Meslé"
        assert plain_text(page.records[1].c[0]) == "Approuvé la rature de quinze mots nuls."

    @pytest.mark.pure
    def test_reserializes_to_same_string(self, ont):
        page = parse_page(APPENDIX_PAGE, STRICT, ont=ont)
        assert serialize_page(page, ont=ont) == APPENDIX_PAGE

    @pytest.mark.pure
    def test_line_breaks_inside_blocks(self, ont):
        wrapped = parse_page(APPENDIX_PAGE_WRAPPED, STRICT, ont=ont)
        assert wrapped == parse_page(APPENDIX_PAGE, STRICT, ont=ont)

    @pytest.mark.pure
    def test_page_id(self, ont):
        assert parse_page(APPENDIX_PAGE, ont=ont, page_id="p7").id == "p7"


class TestSerializePage:
    """Tests for serialize_page()."""

    @pytest.mark.pure
    def test_plain_record(self, moudel_page):
        assert serialize_page(moudel_page) == (
            "<D><A>595 Jegou et Boulin</A>"
            "<B>et Louis Alexandre MOUDEL cultivateur</B>"
            "<C>Approuvé la rature</C></D>"
        )

    @pytest.mark.pure
    def test_entity_scheme_inside_blocks(self, ont, moudel_page):
        text = serialize_page(moudel_page, EncodingScheme.COMBINED_AFTER, ont)
        assert "<B>et Louis<wife_father_first_name> Alexandre<wife_father_first_name>" in text

    @pytest.mark.pure
    def test_empty_blocks_kept(self, ont):
        page = parse_page("<D><A></A><B></B></D>", STRICT, ont=ont)
        assert serialize_page(page) == "<D><A></A><B></B></D>"

    @pytest.mark.pure
    @pytest.mark.parametrize("scheme", list(EncodingScheme))
    def test_round_trip_with_entities(self, ont, moudel_page, scheme):
        text = serialize_page(moudel_page, scheme, ont)
        assert parse_page(text, STRICT, scheme, ont, page_id="moudel") == moudel_page


class TestStrictParse:
    """STRICT parsing raises LayoutError with a UTF-8 byte offset."""

    @pytest.mark.pure
    @pytest.mark.parametrize(
        "text, message, offset",
        [
            ("<D><A>x</A></D>", "record missing block B", 11),
            ("<D><B>x</B></D>", "record missing block A", 3),
            ("<D><A>x</A><A>y</A><B>z</B></D>", "two A blocks in one record", 11),
            ("<D><A>x</A><C>y</C><B>z</B></D>", "record missing block B", 11),
            ("<D><A>x</A>stray<B>y</B></D>", "text outside any block", 11),
            ("<D><A>x</A><B>y</B></D></B>", "stray </B>", 23),
            ("<D><A>x</A><B>y</B><D>", "nested record", 19),
            ("<D><A>x</A><B>y</D>", "unclosed block B", 15),
            ("<D><A>x</A><B>y</B>", "unclosed record at end of input", 19),
            ("", "page has no records", 0),
            ("<A>x</A>", "block A outside any record", 0),
        ],
    )
    def test_errors(self, ont, text, message, offset):
        with pytest.raises(LayoutError, match=message) as excinfo:
            parse_page(text, STRICT, ont=ont)
        assert excinfo.value.offset == offset

    @pytest.mark.pure
    def test_offset_counts_bytes(self, ont):
        # "é" takes two bytes, so the stray text starts at byte 16, char 15
        with pytest.raises(LayoutError) as excinfo:
            parse_page("<D><A>Meslé</A>x</D>", STRICT, ont=ont)
        assert excinfo.value.message == "text outside any block"
        assert excinfo.value.offset == 16

    @pytest.mark.pure
    def test_entity_error_reported_at_page_offset(self, ont, tok):
        text = f"<D><A>é</A><B>Louis </{tok('wife')}></B></D>"
        with pytest.raises(LayoutError, match="orphan closing marker wife") as excinfo:
            parse_page(text, STRICT, EncodingScheme.OPEN_CLOSE, ont)
        # "<D><A>é</A><B>Louis " is 20 characters and 21 bytes
        assert excinfo.value.offset == 21


class TestLenientParse:
    """LENIENT parsing repairs the page and lists every repair."""

    @pytest.mark.pure
    def test_unclosed_block_and_record(self, ont):
        page, diagnostics = parse_page_with_diagnostics("<D><A>x</A><B>y", LENIENT, ont=ont)
        assert len(diagnostics) == 2
        assert [d.message for d in diagnostics] == [
            "unclosed block B at end of input",
            "unclosed record at end of input",
        ]
        assert plain_text(page.records[0].b) == "y"

    @pytest.mark.pure
    def test_missing_block_filled(self, ont):
        page, diagnostics = parse_page_with_diagnostics("<D><A>x</A></D>", LENIENT, ont=ont)
        assert page.records[0].b.words == ()
        assert [d.message for d in diagnostics] == ["record missing block B"]

    @pytest.mark.pure
    def test_blocks_outside_record_wrapped(self, ont):
        page, diagnostics = parse_page_with_diagnostics(
            "<B>y</B><C>z</C>\n<D><A>a</A><B>b</B></D>", LENIENT, ont=ont
        )
        assert len(page.records) == 2
        assert page.records[0].a.words == ()
        assert plain_text(page.records[0]) == "y\nz"
        assert [d.message for d in diagnostics] == ["block B outside any record"]

    @pytest.mark.pure
    def test_duplicate_body_merged(self, ont):
        page, diagnostics = parse_page_with_diagnostics(
            "<D><A>x</A><B>y</B><B>z</B></D>", LENIENT, ont=ont
        )
        assert plain_text(page.records[0].b) == "y z"
        assert [d.message for d in diagnostics] == ["duplicate block B merged"]

    @pytest.mark.pure
    def test_stray_text_and_close_dropped(self, ont):
        page, diagnostics = parse_page_with_diagnostics(
            "noise<D><A>x</A></C><B>y</B></D>", LENIENT, ont=ont
        )
        assert plain_text(page) == "x\ny"
        assert [d.message for d in diagnostics] == ["text outside any block", "stray </C>"]
        assert diagnostics[1].position == 16

    @pytest.mark.pure
    def test_entity_repairs_shifted_to_page_offsets(self, ont, tok):
        text = f"<D><A>x</A><B>Louis </{tok('wife')}></B></D>"
        page, diagnostics = parse_page_with_diagnostics(
            text, LENIENT, EncodingScheme.OPEN_CLOSE, ont
        )
        assert plain_text(page.records[0].b) == "Louis"
        assert [(d.position, d.message) for d in diagnostics] == [
            (20, "orphan closing marker wife")
        ]

    @pytest.mark.pure
    def test_clean_page_has_no_diagnostics(self, ont):
        _, diagnostics = parse_page_with_diagnostics(APPENDIX_PAGE, LENIENT, ont=ont)
        assert diagnostics == []
