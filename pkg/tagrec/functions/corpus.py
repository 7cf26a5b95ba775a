"""
Corpus directories: one file per page plus a manifest.

The manifest lists each page file with its page id and split, and records how the
corpus was produced (PRNG and seed for generated corpora, entity scheme for label
directories). Directories without a manifest are read by scanning for page files.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..constants import (
    CORPUS_FORMAT,
    CORPUS_FORMAT_VERSION,
    DIAGNOSTICS_SUFFIX,
    MANIFEST_FILE,
    PAGE_SUFFIX,
)
from ..models.document import Page, read_document, write_document
from ..models.ontology import TagOntology
from ..validators import CorpusError

_UNSAFE_FILENAME_CHARS = re.compile(r"[^A-Za-z0-9._-]")


@dataclass(frozen=True)
class ManifestEntry:
    file: str
    id: str
    split: str = "train"


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    seed: int | None = None
    prng: str | None = None
    scheme: int | None = None

    @property
    def split_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for entry in self.entries:
            counts[entry.split] = counts.get(entry.split, 0) + 1
        return counts

    def to_dict(self) -> dict[str, Any]:
        manifest: dict[str, Any] = {
            "format": CORPUS_FORMAT,
            "version": CORPUS_FORMAT_VERSION,
            "pages": [{"file": e.file, "id": e.id, "split": e.split} for e in self.entries],
        }
        for key in ("seed", "prng", "scheme"):
            if getattr(self, key) is not None:
                manifest[key] = getattr(self, key)
        return manifest

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, raw: Any) -> Manifest:
        if not isinstance(raw, dict) or not isinstance(raw.get("pages"), list):
            raise CorpusError("manifest must be an object with a 'pages' array")
        if raw.get("format", CORPUS_FORMAT) != CORPUS_FORMAT:
            raise CorpusError(f"unsupported manifest format: {raw.get('format')!r}")
        try:
            entries = tuple(
                ManifestEntry(str(p["file"]), str(p.get("id", "")), str(p.get("split", "train")))
                for p in raw["pages"]
            )
        except (KeyError, TypeError, AttributeError) as e:
            raise CorpusError(f"malformed manifest entry: {e!s}") from e
        return cls(entries, raw.get("seed"), raw.get("prng"), raw.get("scheme"))


def page_filename(page_id: str, index: int, suffix: str = PAGE_SUFFIX) -> str:
    """File name for a page: its id with unsafe characters replaced, or a positional name."""
    stem = _UNSAFE_FILENAME_CHARS.sub("_", page_id) if page_id else f"page-{index:05d}"
    return f"{stem}{suffix}"


def write_manifest(directory: str | Path, manifest: Manifest) -> None:
    try:
        (Path(directory) / MANIFEST_FILE).write_bytes(manifest.to_json().encode("utf-8"))
    except OSError as e:
        raise CorpusError(f"cannot write manifest to {directory}: {e!s}") from e


def read_manifest(directory: str | Path, suffix: str = PAGE_SUFFIX) -> Manifest:
    """
    Manifest of a corpus directory, or one built by scanning for ``*suffix`` files.

    Raises:
        CorpusError: If the manifest is malformed or no page files are found
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"no pages found: {directory} is not a directory")
    path = directory / MANIFEST_FILE
    if path.is_file():
        try:
            manifest = Manifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as e:
            raise CorpusError(f"malformed manifest {path}: {e!s}") from e
    else:
        files = sorted(
            p.name
            for p in directory.glob(f"*{suffix}")
            if p.name != MANIFEST_FILE and not p.name.endswith(DIAGNOSTICS_SUFFIX)
        )
        if files:
            logging.warning("No manifest in %s, using %d files by name", directory, len(files))
        manifest = Manifest(tuple(ManifestEntry(f, Path(f).stem, "unassigned") for f in files))
    if not manifest.entries:
        raise CorpusError(f"no pages found in {directory}")
    return manifest


def write_corpus(
    out: str | Path,
    pages: Sequence[Page],
    splits: Sequence[str] | None = None,
    seed: int | None = None,
    prng: str | None = None,
) -> Manifest:
    """
    Write pages as canonical interchange files plus a manifest.

    Raises:
        CorpusError: If the destination cannot be written
    """
    out = Path(out)
    splits = list(splits) if splits is not None else ["train"] * len(pages)
    entries = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for index, (page, split) in enumerate(zip(pages, splits)):
            name = page_filename(page.id, index)
            (out / name).write_bytes(write_document(page).encode("utf-8"))
            entries.append(ManifestEntry(name, page.id, split))
    except OSError as e:
        raise CorpusError(f"cannot write corpus to {out}: {e!s}") from e
    manifest = Manifest(tuple(entries), seed, prng)
    write_manifest(out, manifest)
    logging.info("Wrote %d pages to %s", len(entries), out)
    return manifest


def read_corpus(directory: str | Path, ont: TagOntology) -> list[tuple[ManifestEntry, Page]]:
    """
    Read every page listed by a corpus directory, in manifest order.

    Raises:
        CorpusError: If no pages are found or a listed file cannot be read
        DocumentError: If a page file is invalid
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    corpus = []
    for entry in manifest.entries:
        try:
            content = (directory / entry.file).read_bytes()
        except OSError as e:
            raise CorpusError(f"cannot read page file {entry.file}: {e!s}") from e
        corpus.append((entry, read_document(content, ont)))
    logging.info("Read %d pages from %s", len(corpus), directory)
    return corpus
