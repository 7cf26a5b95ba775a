from .functions.codecs import (
    CodecOptions,
    DecodePolicy,
    EncodingScheme,
    TaggedString,
    convert,
    decode,
    encode,
    strip_tags,
    to_bio,
)
from .functions.layout import parse_page, serialize_page
from .functions.metrics import cer, edit_distance, iehhr_eval, nerval_eval, wer
from .functions.syngen import GenConfig, generate_corpus, generate_page
from .models.document import Block, Page, RecordD, Word, read_document, write_document
from .models.ontology import canonical_label, default_ontology, load_ontology

# Re-export the public toolkit surface
__all__ = [
    "Block",
    "CodecOptions",
    "DecodePolicy",
    "EncodingScheme",
    "GenConfig",
    "Page",
    "RecordD",
    "TaggedString",
    "Word",
    "canonical_label",
    "cer",
    "convert",
    "decode",
    "default_ontology",
    "edit_distance",
    "encode",
    "generate_corpus",
    "generate_page",
    "iehhr_eval",
    "load_ontology",
    "nerval_eval",
    "parse_page",
    "read_document",
    "serialize_page",
    "strip_tags",
    "to_bio",
    "wer",
    "write_document",
]
