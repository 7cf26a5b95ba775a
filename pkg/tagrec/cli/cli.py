from __future__ import annotations

import json
import logging
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Any, TypeVar

import click

from ..constants import (
    DEFAULT_C_BLOCK_PROBABILITY,
    DEFAULT_CER_THRESHOLD,
    DEFAULT_JOBS,
    DEFAULT_LABEL_PROBABILITY,
    DEFAULT_RECORDS_PER_PAGE,
    DEFAULT_REPEAT_PROBABILITY,
    DIAGNOSTICS_SUFFIX,
    LABEL_SUFFIX,
    ONTOLOGY_ENV_VAR,
)
from ..functions.codecs import CodecOptions, DecodePolicy, EncodingScheme, TaggedString, convert
from ..functions.corpus import (
    Manifest,
    ManifestEntry,
    page_filename,
    read_manifest,
    write_corpus,
    write_manifest,
)
from ..functions.layout import parse_page, parse_page_with_diagnostics, serialize_page
from ..functions.metrics import CorpusEvaluation, PageEvaluation, evaluate_page
from ..functions.syngen import GenConfig, generate_corpus, load_lexicons
from ..models.document import Page, corpus_stats, read_document, split_stats, validate_page
from ..models.ontology import TagOntology, describe_ontology, ontology_from_path
from ..validators import LexiconError, OntologyError

T = TypeVar("T")
R = TypeVar("R")

SCHEME_CHOICES = [str(s.value) for s in EncodingScheme]


def _ontology(path: str | None) -> TagOntology:
    try:
        return ontology_from_path(path)
    except (OSError, OntologyError) as e:
        raise click.ClickException(f"cannot load ontology: {e!s}") from e


def _options(close_marker: str, tag_space: bool) -> CodecOptions:
    return CodecOptions(close_marker=close_marker, tag_word_separator=" " if tag_space else "")


def _scheme(value: str | None, manifest: Manifest | None = None) -> EncodingScheme | None:
    if value is not None:
        return EncodingScheme(int(value))
    if manifest is not None and manifest.scheme is not None:
        return EncodingScheme(int(manifest.scheme))
    return None


def _map(func: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    """Ordered map, fanned out over processes when ``jobs`` > 1."""
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items, chunksize=max(1, len(items) // (jobs * 4))))
    return [func(item) for item in items]


def _fail(failures: Iterable[str], what: str) -> None:
    failures = list(failures)
    for failure in failures:
        logging.error("%s", failure)
    if failures:
        raise click.ClickException(f"{len(failures)} {what} failed; first: {failures[0]}")


def _load_corpus(directory: str, ont: TagOntology) -> tuple[Manifest, list[Page]]:
    """Read and validate every page, reporting each invalid file before failing."""
    try:
        manifest = read_manifest(directory)
    except ValueError as e:
        raise click.ClickException(str(e)) from e
    pages, failures = [], []
    for entry in manifest.entries:
        try:
            pages.append(read_document((Path(directory) / entry.file).read_bytes(), ont))
        except (OSError, ValueError) as e:
            failures.append(f"{entry.file}: {e!s}")
    _fail(failures, "page files")
    return manifest, pages


def _read_labels(directory: str) -> tuple[Manifest, list[str]]:
    try:
        manifest = read_manifest(directory, LABEL_SUFFIX)
        texts = [(Path(directory) / e.file).read_text(encoding="utf-8") for e in manifest.entries]
    except (OSError, ValueError) as e:
        raise click.ClickException(str(e)) from e
    return manifest, texts


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_bytes(text.encode("utf-8"))
    except OSError as e:
        raise click.ClickException(f"cannot write {path}: {e!s}") from e


def _prepare_out(out: str) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise click.ClickException(f"cannot create {path}: {e!s}") from e
    return path


def ontology_option(f):
    return click.option(
        "--ontology",
        "ontology_path",
        type=click.Path(exists=True, dir_okay=False),
        envvar=ONTOLOGY_ENV_VAR,
        default=None,
        help=f"Ontology JSON file (default: ${ONTOLOGY_ENV_VAR}, else the built-in ontology).",
    )(f)


def scheme_option(required: bool):
    return click.option(
        "--scheme",
        type=click.Choice(SCHEME_CHOICES),
        required=required,
        default=None,
        help="Entity encoding scheme 1-5" + ("." if required else " (default: from manifest)."),
    )


def policy_option(default: str):
    return click.option(
        "--policy",
        type=click.Choice([p.value for p in DecodePolicy]),
        default=default,
        show_default=True,
        help="Decoding policy.",
    )


def codec_options(f):
    f = click.option(
        "--tag-space",
        is_flag=True,
        help="Separate scheme-1 tag tokens from their word with a space.",
    )(f)
    return click.option(
        "--close-marker",
        type=click.Choice(["/", "\\"]),
        default="/",
        show_default=True,
        help="Character opening a closing marker in schemes 3 and 4.",
    )(f)


def jobs_option(f):
    return click.option(
        "--jobs", type=click.IntRange(min=1), default=DEFAULT_JOBS, show_default=True,
        help="Worker processes.",
    )(f)


def out_option(f):
    return click.option("--out", type=click.Path(file_okay=False), required=True,
                        help="Output directory.")(f)


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    show_default=True,
)
@click.version_option(package_name="tagrec")
def main(log_level: str) -> None:
    """Codec and evaluation toolkit for entity-tagged transcriptions."""
    logging.basicConfig(level=log_level.upper(), format="%(levelname)s %(message)s")


def _encode_page(
    page: Page, scheme: EncodingScheme, ont: TagOntology, options: CodecOptions
) -> tuple[str | None, str | None]:
    try:
        return serialize_page(page, scheme, ont, options) + "\n", None
    except ValueError as e:
        return None, str(e)


@main.command()
@click.argument("corpus", type=click.Path(exists=True, file_okay=False))
@scheme_option(required=True)
@out_option
@ontology_option
@codec_options
@jobs_option
def encode(corpus, scheme, out, ontology_path, close_marker, tag_space, jobs):
    """Serialize a corpus into one tagged label file per page."""
    ont = _ontology(ontology_path)
    options = _options(close_marker, tag_space)
    manifest, pages = _load_corpus(corpus, ont)
    scheme = _scheme(scheme)
    results = _map(partial(_encode_page, scheme=scheme, ont=ont, options=options), pages, jobs)

    out_dir = _prepare_out(out)
    entries, failures = [], []
    for index, (entry, page, (text, error)) in enumerate(zip(manifest.entries, pages, results)):
        if error is not None:
            failures.append(f"{entry.file}: {error}")
            continue
        name = page_filename(page.id, index, LABEL_SUFFIX)
        _write_text(out_dir / name, text)
        entries.append(ManifestEntry(name, page.id, entry.split))
    _fail(failures, "pages")
    write_manifest(out_dir, replace(manifest, entries=tuple(entries), scheme=int(scheme)))
    logging.info("Encoded %d pages with scheme %d into %s", len(entries), scheme, out_dir)
    click.echo(f"encoded {len(entries)} pages")


def _decode_labels(
    item: tuple[ManifestEntry, str],
    policy: DecodePolicy,
    scheme: EncodingScheme | None,
    ont: TagOntology,
    options: CodecOptions,
) -> tuple[Page | None, list[dict[str, Any]], str | None]:
    entry, text = item
    try:
        page, diagnostics = parse_page_with_diagnostics(
            text, policy, scheme, ont, options, entry.id
        )
    except ValueError as e:
        return None, [], str(e)
    return page, [d.to_dict() for d in diagnostics], None


@main.command()
@click.argument("labels", type=click.Path(exists=True, file_okay=False))
@scheme_option(required=False)
@policy_option(DecodePolicy.STRICT.value)
@out_option
@ontology_option
@codec_options
@jobs_option
def decode(labels, scheme, policy, out, ontology_path, close_marker, tag_space, jobs):
    """Parse tagged label files back into a corpus."""
    ont = _ontology(ontology_path)
    options = _options(close_marker, tag_space)
    manifest, texts = _read_labels(labels)
    scheme = _scheme(scheme, manifest)
    policy = DecodePolicy(policy)
    worker = partial(_decode_labels, policy=policy, scheme=scheme, ont=ont, options=options)
    results = _map(worker, list(zip(manifest.entries, texts)), jobs)

    out_dir = _prepare_out(out)
    pages, splits, failures = [], [], []
    for entry, (page, diagnostics, error) in zip(manifest.entries, results):
        if error is not None:
            failures.append(f"{entry.file}: {error}")
            continue
        if policy is DecodePolicy.LENIENT:
            sidecar = {"file": entry.file, "diagnostics": diagnostics}
            name = Path(entry.file).stem + DIAGNOSTICS_SUFFIX
            _write_text(out_dir / name, json.dumps(sidecar, ensure_ascii=False, indent=2) + "\n")
            if diagnostics:
                logging.warning("%s: %d repairs", entry.file, len(diagnostics))
        pages.append(page)
        splits.append(entry.split)
    _fail(failures, "label files")
    try:
        write_corpus(out_dir, pages, splits, seed=manifest.seed, prng=manifest.prng)
    except ValueError as e:
        raise click.ClickException(str(e)) from e
    click.echo(f"decoded {len(pages)} pages")


@main.command(name="convert")
@click.argument("labels", type=click.Path(exists=True, file_okay=False))
@scheme_option(required=False)
@click.option("--to", "target", type=click.Choice(SCHEME_CHOICES), required=True,
              help="Target encoding scheme.")
@policy_option(DecodePolicy.STRICT.value)
@out_option
@ontology_option
@codec_options
def convert_labels(labels, scheme, target, policy, out, ontology_path, close_marker, tag_space):
    """Re-encode tagged label files under another scheme."""
    ont = _ontology(ontology_path)
    options = _options(close_marker, tag_space)
    manifest, texts = _read_labels(labels)
    source = _scheme(scheme, manifest)
    if source is None:
        raise click.UsageError("--scheme is required when the manifest does not name one")
    target = EncodingScheme(int(target))

    out_dir = _prepare_out(out)
    failures = []
    for entry, text in zip(manifest.entries, texts):
        ts = TaggedString(text, source, ont.ontology_id, layout=True)
        try:
            converted = convert(ts, target, DecodePolicy(policy), ont, options)
        except ValueError as e:
            failures.append(f"{entry.file}: {e!s}")
            continue
        _write_text(out_dir / entry.file, converted.text + "\n")
    _fail(failures, "label files")
    write_manifest(out_dir, replace(manifest, scheme=int(target)))
    click.echo(f"converted {len(manifest.entries)} files to scheme {int(target)}")


def _evaluate(
    item: tuple[Page, str],
    scheme: EncodingScheme | None,
    policy: DecodePolicy,
    threshold: float,
    blocks: str,
    ont: TagOntology,
    options: CodecOptions,
) -> tuple[PageEvaluation | None, str | None]:
    ref, hyp_text = item
    try:
        return evaluate_page(ref, hyp_text, scheme, policy, threshold, blocks, ont, options), None
    except ValueError as e:
        return None, str(e)


@main.command(name="eval")
@click.argument("reference", type=click.Path(exists=True, file_okay=False))
@click.argument("hypothesis", type=click.Path(exists=True, file_okay=False))
@scheme_option(required=False)
@policy_option(DecodePolicy.LENIENT.value)
@click.option("--threshold", type=click.FloatRange(min=0.0), default=DEFAULT_CER_THRESHOLD,
              show_default=True, help="Entity CER acceptance threshold (inclusive).")
@click.option("--blocks", default="ABC", show_default=True,
              help="Block kinds included in the evaluation.")
@out_option
@ontology_option
@codec_options
@jobs_option
def evaluate(reference, hypothesis, scheme, policy, threshold, blocks, out, ontology_path,
             close_marker, tag_space, jobs):
    """Score predicted label files against a reference corpus."""
    if not blocks or set(blocks) - set("ABC"):
        raise click.BadParameter("use a combination of A, B and C", param_hint="--blocks")
    ont = _ontology(ontology_path)
    options = _options(close_marker, tag_space)
    _, pages = _load_corpus(reference, ont)
    manifest, texts = _read_labels(hypothesis)
    scheme = _scheme(scheme, manifest)

    predictions = {entry.id: text for entry, text in zip(manifest.entries, texts)}
    ref_ids = {page.id for page in pages}
    missing, extra = ref_ids - set(predictions), set(predictions) - ref_ids
    if missing or extra:
        _fail(
            [f"missing prediction for page {i}" for i in sorted(missing)]
            + [f"prediction for unknown page {i}" for i in sorted(extra)],
            "page id checks",
        )

    worker = partial(
        _evaluate, scheme=scheme, policy=DecodePolicy(policy), threshold=threshold,
        blocks=blocks, ont=ont, options=options,
    )
    results = _map(worker, [(page, predictions[page.id]) for page in pages], jobs)
    _fail([f"{page.id}: {error}" for page, (_, error) in zip(pages, results) if error], "pages")

    report = CorpusEvaluation(tuple(r for r, _ in results), threshold, blocks)
    out_dir = _prepare_out(out)
    _write_text(out_dir / "eval.json", report.to_json())
    _write_text(out_dir / "eval.txt", report.to_table() + "\n")
    logging.info("Wrote evaluation reports to %s", out_dir)
    click.echo(report.to_table())


@main.command()
@click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=0, show_default=True)
@click.option("-n", "--pages", "count", type=click.IntRange(min=1), required=True,
              help="Number of pages.")
@out_option
@click.option("--records-min", type=click.IntRange(min=1), default=DEFAULT_RECORDS_PER_PAGE[0],
              show_default=True)
@click.option("--records-max", type=click.IntRange(min=1), default=DEFAULT_RECORDS_PER_PAGE[1],
              show_default=True)
@click.option("--c-probability", type=click.FloatRange(0.0, 1.0),
              default=DEFAULT_C_BLOCK_PROBABILITY, show_default=True)
@click.option("--label-probability", type=click.FloatRange(0.0, 1.0),
              default=DEFAULT_LABEL_PROBABILITY, show_default=True)
@click.option("--repeat-probability", type=click.FloatRange(0.0, 1.0),
              default=DEFAULT_REPEAT_PROBABILITY, show_default=True)
@click.option("--sentences", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Carrier sentence file, one sentence per line.")
@click.option("--lexicons", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Lexicon JSON file.")
@ontology_option
@jobs_option
def gen(seed, count, out, records_min, records_max, c_probability, label_probability,
        repeat_probability, sentences, lexicons, ontology_path, jobs):
    """Generate a seeded synthetic corpus."""
    ont = _ontology(ontology_path)
    try:
        cfg = GenConfig(
            seed=seed,
            records_min=records_min,
            records_max=records_max,
            c_block_probability=c_probability,
            label_probability=label_probability,
            repeat_probability=repeat_probability,
            sentences=sentences,
        )
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    try:
        lex = load_lexicons(Path(lexicons).read_text(encoding="utf-8"), ont) if lexicons else None
        manifest = generate_corpus(cfg, count, out, lex, ont, jobs)
    except (OSError, LexiconError, ValueError) as e:
        raise click.ClickException(str(e)) from e
    splits = manifest.split_counts
    click.echo(
        f"generated {len(manifest.entries)} pages: "
        + ", ".join(f"{name} {splits.get(name, 0)}" for name in ("train", "valid", "test"))
    )


@main.command()
@click.argument("corpus", type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the JSON report to this file.")
@ontology_option
def stats(corpus, out, ontology_path):
    """Annotation statistics of a corpus, overall and per split."""
    ont = _ontology(ontology_path)
    manifest, pages = _load_corpus(corpus, ont)
    by_split: dict[str, list[Page]] = {}
    for entry, page in zip(manifest.entries, pages):
        by_split.setdefault(entry.split, []).append(page)
    total = corpus_stats(pages)
    report = {
        "all": total.to_dict(),
        "splits": {name: s.to_dict() for name, s in sorted(split_stats(by_split).items())},
    }
    if out:
        content = json.dumps(report, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
        _write_text(Path(out), content)
    click.echo(total.to_table())


def _validate_page(page: Page, ont: TagOntology) -> list[str]:
    problems = []
    try:
        validate_page(page, ont)
        for scheme in EncodingScheme:
            text = serialize_page(page, scheme, ont)
            if parse_page(text, DecodePolicy.STRICT, scheme, ont, page_id=page.id) != page:
                problems.append(f"scheme {int(scheme)} layout round trip changed the page")
    except ValueError as e:
        problems.append(str(e))
    return problems


@main.command()
@click.pass_context
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--labels", is_flag=True, help="Validate tagged label files instead of page files.")
@scheme_option(required=False)
@ontology_option
@codec_options
def validate(ctx, directory, labels, scheme, ontology_path, close_marker, tag_space):
    """Check a corpus (or label directory) and list every problem found."""
    ont = _ontology(ontology_path)
    problems = []
    if labels:
        manifest, texts = _read_labels(directory)
        options = _options(close_marker, tag_space)
        for entry, text in zip(manifest.entries, texts):
            try:
                parse_page(text, DecodePolicy.STRICT, _scheme(scheme, manifest), ont, options)
            except ValueError as e:
                problems.append(f"{entry.file}: {e!s}")
        checked = len(manifest.entries)
    else:
        try:
            manifest = read_manifest(directory)
        except ValueError as e:
            raise click.ClickException(str(e)) from e
        for entry in manifest.entries:
            try:
                page = read_document((Path(directory) / entry.file).read_bytes(), ont)
            except (OSError, ValueError) as e:
                problems.append(f"{entry.file}: {e!s}")
                continue
            problems.extend(f"{entry.file}: {p}" for p in _validate_page(page, ont))
        checked = len(manifest.entries)
    for problem in problems:
        click.echo(problem)
    click.echo(f"{checked} files checked, {len(problems)} problems")
    if problems:
        ctx.exit(1)


@main.command(name="ontology")
@ontology_option
def show_ontology(ontology_path):
    """Print the tag table of the active ontology."""
    click.echo(describe_ontology(_ontology(ontology_path)))
