"""
Configuration constants for the tagrec toolkit.

These values control tag token assignment, evaluation thresholds, synthetic corpus
generation and report formatting across the package.
"""

# Tag tokens are single Private Use Area codepoints so they never collide with text
PUA_FIRST_CODEPOINT = 0xE000
PUA_LAST_CODEPOINT = 0xF8FF
TOKEN_BASE_CODEPOINT = PUA_FIRST_CODEPOINT  # token of the first declared tag

# Hierarchy
ONTOLOGY_LEVELS = (1, 2, 3, 4)
DEFAULT_LEVEL_CARDINALITY = {1: (1, 1), 2: (0, 2), 3: (0, 1), 4: (1, 1)}  # level -> (min, max)

# Layout blocks: A margin name, B record body, C marginal note, D record wrapper
BLOCK_KINDS = ("A", "B", "C")
RECORD_KIND = "D"
LAYOUT_MARKER_CHARS = frozenset("<>/\\ABCD")

# Evaluation
DEFAULT_CER_THRESHOLD = 0.30  # inclusive: entity accepted when cer <= threshold
REPORT_DECIMALS = 2

# Synthetic generation
DEFAULT_RECORDS_PER_PAGE = (1, 3)
DEFAULT_C_BLOCK_PROBABILITY = 0.5
DEFAULT_LABEL_PROBABILITY = 1.0
DEFAULT_REPEAT_PROBABILITY = 0.3
PRNG_ALGORITHM = "numpy-pcg64-seedsequence"
SPLIT_RATIOS = {"train": 0.8, "valid": 0.1, "test": 0.1}

# Corpus layout on disk
MANIFEST_FILE = "manifest.json"
PAGE_SUFFIX = ".json"
LABEL_SUFFIX = ".txt"
DIAGNOSTICS_SUFFIX = ".diagnostics.json"
CORPUS_FORMAT = "tagrec-corpus"
CORPUS_FORMAT_VERSION = 1

# CLI
ONTOLOGY_ENV_VAR = "TAGREC_ONTOLOGY"
DEFAULT_JOBS = 1
