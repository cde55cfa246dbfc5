"""Dataset loading: line-aligned multi-reference files, M2-annotated GEC
files, and generic paired JSONL.

All loaders are pure functions over file contents; text is used verbatim
apart from stripping surrounding whitespace per line. Token operations
split and re-join on single spaces; no detokenizer is involved.
"""

from __future__ import annotations

import json
import random
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path


class CorpusFormatError(ValueError):
    """Input file violates the expected layout."""


class ConfigurationError(ValueError):
    """Infeasible split or loader arguments."""


@dataclass(frozen=True)
class SamplePair:
    id: str
    source: str
    references: tuple[str, ...]

    def __post_init__(self):
        if not self.references:
            raise ValueError(f"sample {self.id}: references must be non-empty")


@dataclass(frozen=True)
class M2Edit:
    start: int
    end: int
    type_label: str
    correction: str
    annotator: int


@dataclass(frozen=True)
class M2Record:
    source_tokens: tuple[str, ...]
    edits: tuple[M2Edit, ...] = ()
    noop_annotators: frozenset[int] = field(default_factory=frozenset)

    def source_text(self) -> str:
        return " ".join(self.source_tokens)

    def edits_by_annotator(self) -> dict[int, list[M2Edit]]:
        grouped: dict[int, list[M2Edit]] = {}
        for edit in self.edits:
            grouped.setdefault(edit.annotator, []).append(edit)
        return grouped

    def annotator_ids(self) -> list[int]:
        ids = set(self.noop_annotators)
        ids.update(e.annotator for e in self.edits)
        return sorted(ids) if ids else [0]


@dataclass(frozen=True)
class SplitSpec:
    train_size: int
    dev_size: int
    seed: int = 0


def _read_lines(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    if text.endswith("\n"):
        text = text[:-1]
    if not text:
        raise CorpusFormatError(f"{path}: file is empty")
    return [line.strip() for line in text.split("\n")]


def load_asset(source_path: str | Path, reference_paths: Sequence[str | Path]) -> list[SamplePair]:
    """Line-aligned source file plus one file per reference."""
    sources = _read_lines(source_path)
    columns = []
    for ref_path in reference_paths:
        lines = _read_lines(ref_path)
        if len(lines) != len(sources):
            raise CorpusFormatError(
                f"{ref_path}: line-count mismatch ({len(lines)} lines, "
                f"expected {len(sources)} from {source_path})"
            )
        columns.append(lines)
    return [
        SamplePair(
            id=f"asset-{i}",
            source=src,
            references=tuple(col[i] for col in columns),
        )
        for i, src in enumerate(sources)
    ]


def load_jsonl(path: str | Path) -> list[SamplePair]:
    """One JSON object per line with "source" and "references" keys."""
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "source" not in obj or "references" not in obj:
                raise CorpusFormatError(
                    f"{path}:{lineno}: object must carry 'source' and 'references'"
                )
            refs = tuple(str(r).strip() for r in obj["references"])
            if not refs:
                raise CorpusFormatError(f"{path}:{lineno}: empty reference list")
            pairs.append(
                SamplePair(
                    id=str(obj.get("id", f"jsonl-{lineno - 1}")),
                    source=str(obj["source"]).strip(),
                    references=refs,
                )
            )
    if not pairs:
        raise CorpusFormatError(f"{path}: file is empty")
    seen: set[str] = set()
    for pair in pairs:
        if pair.id in seen:
            raise CorpusFormatError(f"{path}: duplicate sample id {pair.id!r}")
        seen.add(pair.id)
    return pairs


_NOOP_TYPE = "noop"
_NONE_FIELD = "-NONE-"


def _parse_m2_block(lines: list[tuple[int, str]], path: str | Path) -> M2Record:
    lineno, first = lines[0]
    if not first.startswith("S ") and first != "S":
        raise CorpusFormatError(f"{path}:{lineno}: record must start with an 'S ' line")
    rest = first[2:]
    tokens = tuple(rest.split(" ")) if rest else ()
    edits: list[M2Edit] = []
    noops: set[int] = set()
    for lineno, line in lines[1:]:
        if not line.startswith("A "):
            raise CorpusFormatError(f"{path}:{lineno}: expected an 'A ' edit line")
        fields = line[2:].split("|||")
        if len(fields) != 6:
            raise CorpusFormatError(
                f"{path}:{lineno}: expected 6 '|||'-separated fields, got {len(fields)}"
            )
        span = fields[0].split()
        if len(span) != 2:
            raise CorpusFormatError(f"{path}:{lineno}: span must be two integers")
        try:
            start, end = int(span[0]), int(span[1])
        except ValueError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: non-integer span") from exc
        try:
            annotator = int(fields[5])
        except ValueError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: non-integer annotator id") from exc
        type_label = fields[1]
        if type_label == _NOOP_TYPE or (start, end) == (-1, -1):
            noops.add(annotator)
            continue
        if not 0 <= start <= end <= len(tokens):
            raise CorpusFormatError(
                f"{path}:{lineno}: span {start} {end} outside 0..{len(tokens)}"
            )
        correction = "" if fields[2] == _NONE_FIELD else fields[2]
        edits.append(M2Edit(start, end, type_label, correction, annotator))
    conflict = noops & {e.annotator for e in edits}
    if conflict:
        raise CorpusFormatError(
            f"{path}:{lines[0][0]}: noop coexists with substantive edits "
            f"for annotator(s) {sorted(conflict)}"
        )
    return M2Record(tokens, tuple(edits), frozenset(noops))


def load_m2(path: str | Path) -> list[M2Record]:
    """Parse an M2 file into records split on blank lines."""
    text = Path(path).read_text(encoding="utf-8")
    records = []
    block: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            if block:
                records.append(_parse_m2_block(block, path))
                block = []
            continue
        block.append((lineno, line))
    if block:
        records.append(_parse_m2_block(block, path))
    if not records:
        raise CorpusFormatError(f"{path}: file is empty")
    return records


def serialize_m2(record: M2Record) -> str:
    """Canonical M2 text for a record (inverse of parsing)."""
    lines = ["S " + " ".join(record.source_tokens)]
    for edit in record.edits:
        correction = edit.correction if edit.correction else _NONE_FIELD
        lines.append(
            f"A {edit.start} {edit.end}|||{edit.type_label}|||{correction}"
            f"|||REQUIRED|||{_NONE_FIELD}|||{edit.annotator}"
        )
    for annotator in sorted(record.noop_annotators):
        lines.append(f"A -1 -1|||{_NOOP_TYPE}|||{_NONE_FIELD}|||REQUIRED|||{_NONE_FIELD}|||{annotator}")
    return "\n".join(lines) + "\n"


def apply_edits(record: M2Record, annotator: int) -> str:
    """Materialize one annotator's reference by applying edits right-to-left."""
    grouped = record.edits_by_annotator()
    known = set(grouped) | record.noop_annotators
    if known and annotator not in known:
        raise LookupError(f"unknown annotator {annotator}; record has {sorted(known)}")
    edits = grouped.get(annotator, [])
    ordered = sorted(edits, key=lambda e: (e.start, e.end))
    for prev, nxt in zip(ordered, ordered[1:]):
        if nxt.start < prev.end:
            raise CorpusFormatError(
                f"overlapping edits for annotator {annotator}: "
                f"({prev.start},{prev.end}) and ({nxt.start},{nxt.end})"
            )
    tokens = list(record.source_tokens)
    for edit in reversed(ordered):
        tokens[edit.start: edit.end] = edit.correction.split() if edit.correction else []
    return " ".join(tokens)


def reference_texts(record: M2Record) -> list[str]:
    """All annotator references for a record, in annotator-id order."""
    return [apply_edits(record, a) for a in record.annotator_ids()]


def sample_split(
    corpus: Sequence[SamplePair], spec: SplitSpec
) -> tuple[list[SamplePair], list[SamplePair]]:
    """Disjoint seeded train/dev split, order-stable w.r.t. the corpus."""
    if spec.train_size < 0 or spec.dev_size < 0:
        raise ConfigurationError("split sizes must be non-negative")
    if spec.train_size + spec.dev_size > len(corpus):
        raise ConfigurationError(
            f"train+dev ({spec.train_size}+{spec.dev_size}) exceeds corpus size {len(corpus)}"
        )
    rng = random.Random(spec.seed)
    picks = rng.sample(range(len(corpus)), spec.train_size + spec.dev_size)
    train_idx = sorted(picks[: spec.train_size])
    dev_idx = sorted(picks[spec.train_size:])
    return [corpus[i] for i in train_idx], [corpus[i] for i in dev_idx]
