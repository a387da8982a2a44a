"""Data model and ingestion for lexicographic example-definition datasets.

Two input formats are supported:

* shared-task style TSV (header row, configurable column names), and
* a flat lexicon export in JSON-lines with keys ``word``, ``sense_id``,
  ``definition``, ``usage``.

Both produce :class:`DatasetSplit` objects which serialize to a fixed
canonical TSV (see :func:`write_split` / :func:`read_split`).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import IoFailure, MalformedLine, MalformedRow, MissingColumn

logger = logging.getLogger(__name__)

CANONICAL_HEADER = (
    "language",
    "word",
    "sense_id",
    "definition",
    "usage",
    "period",
    "novel",
    "source",
)

_TRUE_STRINGS = {"1", "true", "yes"}
_FALSE_STRINGS = {"", "0", "false", "no"}


@dataclass(frozen=True)
class Language:
    """ISO-style language code; lowercase ASCII, e.g. ``fi``, ``ru``, ``de``."""

    code: str

    def __post_init__(self):
        if not self.code:
            raise ValueError("language code must be non-empty")
        if not self.code.isascii() or self.code != self.code.lower():
            raise ValueError(f"language code must be lowercase ASCII: {self.code!r}")


FI = Language("fi")
RU = Language("ru")
DE = Language("de")


class Period(str, Enum):
    OLD = "old"
    NEW = "new"
    UNSPECIFIED = "unspecified"


class Source(str, Enum):
    AXOLOTL = "axolotl"
    DBNARY = "dbnary"


class SplitName(str, Enum):
    TRAIN_A = "train_a"
    TRAIN_AD = "train_ad"
    DEV = "dev"
    TEST = "test"


@dataclass(frozen=True)
class LexRecord:
    """One (word, sense, definition, usage) observation.

    ``definition`` is None when absent (e.g. test-time novel senses whose
    gloss is to be predicted).  Flat-lexicon records always carry
    ``period = unspecified``.
    """

    language: Language
    word: str
    sense_id: str
    usage: str
    definition: str | None = None
    period: Period = Period.UNSPECIFIED
    is_novel_sense: bool = False
    source: Source = Source.AXOLOTL

    def __post_init__(self):
        if not self.word.strip():
            raise ValueError("word must be non-empty")
        if not self.usage.strip():
            raise ValueError("usage must be non-empty")
        if self.definition is not None and not self.definition.strip():
            object.__setattr__(self, "definition", None)
        if self.source is Source.DBNARY and self.period is not Period.UNSPECIFIED:
            raise ValueError("flat-lexicon records carry no time period")


@dataclass
class DatasetSplit:
    """An ordered list of records for one language; order is preserved exactly."""

    name: SplitName
    language: Language
    records: list[LexRecord] = field(default_factory=list)

    def __post_init__(self):
        for rec in self.records:
            if rec.language != self.language:
                raise ValueError(
                    f"record language {rec.language.code!r} does not match "
                    f"split language {self.language.code!r}"
                )

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class ColumnMap:
    """Mapping from logical fields to source column headers.

    ``word``, ``sense_id`` and ``usage`` are mandatory; the others fall back
    to defaults when their column is absent (period = unspecified, novel
    flag = false, definition = absent).
    """

    word: str = "word"
    sense_id: str = "sense_id"
    usage: str = "example"
    definition: str = "gloss"
    period: str = "period"
    novel_flag: str = "novel"


@dataclass(frozen=True)
class SplitStats:
    records: int
    words: int
    senses: int
    with_definition: int


def _parse_period(value: str, line_number: int) -> Period:
    folded = value.strip().lower()
    if folded in ("", "unspecified"):
        return Period.UNSPECIFIED
    if folded in ("old", "new"):
        return Period(folded)
    raise MalformedRow(f"unrecognized period value {value!r}", line_number)


def _parse_flag(value: str, line_number: int) -> bool:
    folded = value.strip().lower()
    if folded in _TRUE_STRINGS:
        return True
    if folded in _FALSE_STRINGS:
        return False
    raise MalformedRow(f"unrecognized boolean value {value!r}", line_number)


def parse_axolotl_tsv(
    path: str | Path,
    language: Language,
    columns: ColumnMap = ColumnMap(),
    *,
    name: SplitName = SplitName.TEST,
    lenient: bool = False,
) -> DatasetSplit:
    """Parse a shared-task style TSV file into a :class:`DatasetSplit`.

    The first line must be a header row.  In strict mode (default) malformed
    rows abort the parse; with ``lenient=True`` they are skipped with a
    logged warning.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MissingColumn(f"{path}: empty file, expected a header row")

    header = lines[0].split("\t")
    index = {col: i for i, col in enumerate(header)}
    for logical in ("word", "sense_id", "usage"):
        col = getattr(columns, logical)
        if col not in index:
            raise MissingColumn(
                f"{path}: mandatory column {col!r} (logical field {logical!r}) "
                f"not found in header {header}"
            )

    def cell(row: list[str], column: str) -> str:
        pos = index.get(column)
        return row[pos].strip() if pos is not None and pos < len(row) else ""

    records: list[LexRecord] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        row = line.split("\t")
        try:
            if len(row) != len(header):
                raise MalformedRow(
                    f"expected {len(header)} fields, got {len(row)}", line_number
                )
            definition = cell(row, columns.definition) or None
            records.append(
                LexRecord(
                    language=language,
                    word=cell(row, columns.word),
                    sense_id=cell(row, columns.sense_id),
                    usage=cell(row, columns.usage),
                    definition=definition,
                    period=_parse_period(cell(row, columns.period), line_number),
                    is_novel_sense=_parse_flag(cell(row, columns.novel_flag), line_number),
                    source=Source.AXOLOTL,
                )
            )
        except (MalformedRow, ValueError) as exc:
            if not lenient:
                if isinstance(exc, MalformedRow):
                    raise
                raise MalformedRow(str(exc), line_number) from exc
            logger.warning("%s: skipping line %d: %s", path, line_number, exc)
    return DatasetSplit(name=name, language=language, records=records)


def parse_flat_lexicon(
    path: str | Path,
    language: Language,
    *,
    name: SplitName = SplitName.TRAIN_AD,
    lenient: bool = False,
) -> DatasetSplit:
    """Parse a flat lexicon JSON-lines export (word/sense_id/definition/usage).

    Records are tagged ``source = dbnary`` with an unspecified period.
    Duplicate lines yield duplicate records; deduplication is curation's job.
    """
    path = Path(path)
    records: list[LexRecord] = []
    with path.open(encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(
                    LexRecord(
                        language=language,
                        word=str(obj["word"]).strip(),
                        sense_id=str(obj["sense_id"]).strip(),
                        usage=str(obj["usage"]).strip(),
                        definition=str(obj["definition"]).strip() or None
                        if obj.get("definition") is not None
                        else None,
                        source=Source.DBNARY,
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                if not lenient:
                    raise MalformedLine(str(exc), line_number) from exc
                logger.warning("%s: skipping line %d: %s", path, line_number, exc)
    return DatasetSplit(name=name, language=language, records=records)


def _sanitize_field(value: str, context: str) -> str:
    """Replace embedded tabs/newlines by single spaces so the TSV stays naive-splittable."""
    if any(ch in value for ch in "\t\n\r"):
        logger.warning("replacing embedded tab/newline in %s", context)
        value = " ".join(value.replace("\t", " ").replace("\r", " ").split("\n"))
        value = " ".join(value.split())
    return value


def write_split(split: DatasetSplit, path: str | Path) -> None:
    """Write the canonical split TSV (UTF-8, LF endings, fixed header)."""
    path = Path(path)
    lines = ["\t".join(CANONICAL_HEADER)]
    for i, rec in enumerate(split.records):
        context = f"record {i} ({rec.word!r})"
        lines.append(
            "\t".join(
                (
                    rec.language.code,
                    _sanitize_field(rec.word, context),
                    _sanitize_field(rec.sense_id, context),
                    _sanitize_field(rec.definition or "", context),
                    _sanitize_field(rec.usage, context),
                    rec.period.value,
                    "1" if rec.is_novel_sense else "0",
                    rec.source.value,
                )
            )
        )
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_split(
    path: str | Path,
    *,
    name: SplitName = SplitName.TEST,
    language: Language | None = None,
) -> DatasetSplit:
    """Read a canonical split TSV written by :func:`write_split`.

    ``read_split(write_split(s))`` restores an equal record list; the split
    name is not stored in the file and must be supplied by the caller.
    ``language`` is inferred from the rows and only required for header-only
    files.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MissingColumn(f"{path}: empty file, expected the canonical header")
    header = tuple(lines[0].split("\t"))
    if header != CANONICAL_HEADER:
        raise MissingColumn(
            f"{path}: not a canonical split file; header {header} != {CANONICAL_HEADER}"
        )
    records: list[LexRecord] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        row = line.split("\t")
        if len(row) != len(CANONICAL_HEADER):
            raise MalformedRow(
                f"expected {len(CANONICAL_HEADER)} fields, got {len(row)}", line_number
            )
        lang, word, sense_id, definition, usage, period, novel, source = row
        rec = LexRecord(
            language=Language(lang),
            word=word,
            sense_id=sense_id,
            usage=usage,
            definition=definition or None,
            period=_parse_period(period, line_number),
            is_novel_sense=_parse_flag(novel, line_number),
            source=Source(source),
        )
        if language is None:
            language = rec.language
        records.append(rec)
    if language is None:
        raise MissingColumn(
            f"{path}: header-only file; pass language= to read an empty split"
        )
    return DatasetSplit(name=name, language=language, records=records)


def split_stats(split: DatasetSplit) -> SplitStats:
    """Counts of records, distinct words, distinct senses, records with definitions."""
    return SplitStats(
        records=len(split.records),
        words=len({rec.word for rec in split.records}),
        senses=len({(rec.word, rec.sense_id) for rec in split.records}),
        with_definition=sum(1 for rec in split.records if rec.definition is not None),
    )
