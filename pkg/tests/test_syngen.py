"""Tests for the seeded synthetic page generator."""

import pytest

from tagrec.functions.codecs import DecodePolicy, EncodingScheme
from tagrec.functions.layout import parse_page, serialize_page
from tagrec.functions.syngen import (
    TEMPLATE_CARRIER_COUNT,
    TEMPLATE_SLOT_COUNT,
    GenConfig,
    _carriers,
    assign_splits,
    default_lexicons,
    generate_corpus,
    generate_page,
    load_lexicons,
    load_sentences,
    page_rng,
)
from tagrec.models.document import corpus_stats, validate_page, write_document
from tagrec.validators import LexiconError


def _lexicon_mapping(drop: str | None = None) -> dict:
    lex = default_lexicons()
    mapping = {name: list(pool) for name, pool in lex.pools.items()}
    mapping.update({name: {"min": low, "max": high} for name, (low, high) in lex.ranges.items()})
    mapping.pop(drop, None)
    return mapping


class TestGenConfig:
    """Tests for GenConfig validation."""

    @pytest.mark.pure
    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"seed": -1}, "seed must be a non-negative 64-bit integer"),
            ({"seed": 2**64}, "seed must be a non-negative 64-bit integer"),
            ({"records_min": 0}, "records per page"),
            ({"records_min": 3, "records_max": 2}, "records per page"),
            ({"c_block_probability": 1.5}, "c_block_probability must be between 0 and 1"),
            ({"label_probability": -0.1}, "label_probability must be between 0 and 1"),
            ({"repeat_probability": 2}, "repeat_probability must be between 0 and 1"),
        ],
    )
    def test_invalid(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            GenConfig(**kwargs)


class TestGeneratePage:
    """Tests for generate_page()."""

    @pytest.mark.pure
    def test_same_seed_same_page(self):
        cfg = GenConfig(seed=1)
        assert write_document(generate_page(cfg)) == write_document(generate_page(cfg))

    @pytest.mark.pure
    def test_pages_differ_by_index(self):
        cfg = GenConfig(seed=1)
        assert generate_page(cfg, index=0) != generate_page(cfg, index=1)

    @pytest.mark.pure
    def test_page_id(self):
        assert generate_page(GenConfig(seed=4), index=12).id == "synth-4-00012"

    @pytest.mark.pure
    def test_no_labels(self):
        page = generate_page(GenConfig(seed=2, label_probability=0.0))
        assert corpus_stats([page]).entities == 0

    @pytest.mark.pure
    def test_every_slot_labeled(self):
        cfg = GenConfig(seed=2, records_min=1, records_max=1, label_probability=1.0)
        assert corpus_stats([generate_page(cfg)]).entities == TEMPLATE_SLOT_COUNT

    @pytest.mark.pure
    def test_record_count_in_range(self):
        cfg = GenConfig(seed=3, records_min=2, records_max=4)
        counts = {len(generate_page(cfg, index=i).records) for i in range(40)}
        assert counts <= {2, 3, 4}
        assert len(counts) > 1

    @pytest.mark.pure
    def test_labels_only_in_body(self, generated_pages):
        for page in generated_pages:
            for record in page.records:
                assert all(w.label is None for w in record.a.words)
                assert all(w.label is None for block in record.c for w in block.words)

    @pytest.mark.pure
    def test_margin_names_the_couple(self, generated_pages):
        for page in generated_pages:
            for record in page.records:
                body = [w.text for w in record.b.words]
                margin = [w.text for w in record.a.words]
                assert margin[0].isdigit()
                assert "et" in margin
                assert set(margin[1:]) - {"et"} <= set(body)

    @pytest.mark.pure
    def test_day_values_in_range(self, generated_pages):
        days = [
            int(w.text)
            for page in generated_pages
            for w in page.words
            if w.label is not None and w.label.leaf.name == "day"
        ]
        assert days
        assert all(1 <= day <= 31 for day in days)

    @pytest.mark.pure
    def test_pages_are_valid(self, ont, generated_pages):
        for page in generated_pages:
            validate_page(page, ont)

    @pytest.mark.pure
    @pytest.mark.parametrize("scheme", list(EncodingScheme))
    def test_layout_round_trip(self, ont, generated_pages, scheme):
        for page in generated_pages:
            text = serialize_page(page, scheme, ont)
            assert parse_page(text, DecodePolicy.STRICT, scheme, ont, page_id=page.id) == page

    @pytest.mark.medium
    def test_c_block_fraction(self):
        cfg = GenConfig(seed=5)
        records = [r for i in range(1000) for r in generate_page(cfg, index=i).records]
        fraction = sum(bool(r.c) for r in records) / len(records)
        assert 0.45 <= fraction <= 0.55


class TestCarriers:
    """Tests for carrier sentence selection."""

    @pytest.mark.pure
    def test_repeat_reuses_a_sentence(self):
        sentences = tuple((f"phrase{i}",) for i in range(500))
        cfg = GenConfig(repeat_probability=1.0)
        chosen = _carriers(cfg, sentences, page_rng(0, 0))
        assert len(chosen) == TEMPLATE_CARRIER_COUNT
        assert len(set(chosen)) < TEMPLATE_CARRIER_COUNT

    @pytest.mark.pure
    def test_load_sentences_skips_markup(self):
        sentences = load_sentences("Le village est situé.\n\n<b>gras</b>\nLa commune.\n")
        assert sentences == (("Le", "village", "est", "situé."), ("La", "commune."))

    @pytest.mark.pure
    def test_no_usable_sentence(self):
        with pytest.raises(LexiconError, match="no usable carrier sentences"):
            load_sentences("<x>\n\n")


class TestLexicons:
    """Tests for load_lexicons() and the bundled lexicons."""

    @pytest.mark.pure
    def test_bundled_lexicons_cover_every_value_tag(self, ont):
        lex = default_lexicons()
        leaves = [tag.name for tag in ont.tags if tag.level == 4]
        assert len(leaves) == 15
        assert all(lex.covers(name) for name in leaves)

    @pytest.mark.pure
    def test_missing_pool_names_the_tag(self, ont):
        with pytest.raises(LexiconError, match="missing pool for level-4 tag 'occupation'"):
            load_lexicons(_lexicon_mapping(drop="occupation"), ont)

    @pytest.mark.pure
    def test_range_sampling(self, ont):
        mapping = _lexicon_mapping()
        mapping["age"] = {"min": 40, "max": 40}
        lex = load_lexicons(mapping, ont)
        assert lex.sample("age", page_rng(0, 0)) == ["40"]

    @pytest.mark.pure
    def test_multi_word_values_split(self, ont):
        mapping = _lexicon_mapping()
        mapping["street_name"] = ["de  la Paix"]
        lex = load_lexicons(mapping, ont)
        assert lex.sample("street_name", page_rng(0, 0)) == ["de", "la", "Paix"]

    @pytest.mark.pure
    @pytest.mark.parametrize(
        "entry, message",
        [
            ({"min": 5, "max": 1}, "min 5 above max 1"),
            ({"min": "x"}, "needs integer min and max"),
            ([], "empty pool"),
            ([""], "empty or non-text value"),
            ("Paris", "must be an array or a range"),
        ],
    )
    def test_invalid_entries(self, ont, entry, message):
        mapping = _lexicon_mapping()
        mapping["city"] = entry
        with pytest.raises(LexiconError, match=message):
            load_lexicons(mapping, ont)

    @pytest.mark.pure
    def test_malformed_json(self, ont):
        with pytest.raises(LexiconError, match="malformed lexicon file"):
            load_lexicons("{", ont)


class TestSplits:
    """Tests for assign_splits()."""

    @pytest.mark.pure
    def test_ten_pages(self):
        splits = assign_splits(7, 10)
        assert splits.count("train") == 8
        assert splits.count("valid") == 1
        assert splits.count("test") == 1

    @pytest.mark.pure
    def test_single_page_is_train(self):
        assert assign_splits(7, 1) == ["train"]

    @pytest.mark.pure
    def test_seed_dependent(self):
        assert assign_splits(1, 100) == assign_splits(1, 100)
        assert assign_splits(1, 100) != assign_splits(2, 100)


class TestGenerateCorpus:
    """Tests for generate_corpus()."""

    @staticmethod
    def _snapshot(directory):
        return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}

    @pytest.mark.light
    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = GenConfig(seed=9)
        generate_corpus(cfg, 6, tmp_path / "first")
        generate_corpus(cfg, 6, tmp_path / "second")
        assert self._snapshot(tmp_path / "first") == self._snapshot(tmp_path / "second")

    @pytest.mark.light
    def test_jobs_do_not_change_output(self, tmp_path):
        cfg = GenConfig(seed=9)
        generate_corpus(cfg, 6, tmp_path / "serial", jobs=1)
        generate_corpus(cfg, 6, tmp_path / "parallel", jobs=2)
        assert self._snapshot(tmp_path / "serial") == self._snapshot(tmp_path / "parallel")

    @pytest.mark.light
    def test_manifest(self, tmp_path):
        manifest = generate_corpus(GenConfig(seed=9), 10, tmp_path)
        assert manifest.seed == 9
        assert manifest.prng == "numpy-pcg64-seedsequence"
        assert manifest.split_counts == {"train": 8, "valid": 1, "test": 1}
        assert (tmp_path / "manifest.json").is_file()
        assert (tmp_path / "synth-9-00000.json").is_file()

    @pytest.mark.light
    def test_size_must_be_positive(self, tmp_path):
        with pytest.raises(ValueError, match="at least 1"):
            generate_corpus(GenConfig(), 0, tmp_path)
