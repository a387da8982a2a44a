from __future__ import annotations

from pathlib import Path

import pytest

from defgen.corpus import DatasetSplit, Language, LexRecord, Period, Source, SplitName

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_record(
    word: str,
    sense_id: str | None = None,
    usage: str | None = None,
    definition: str | None = None,
    language: str = "fi",
    period: Period = Period.UNSPECIFIED,
    novel: bool = False,
    source: Source = Source.AXOLOTL,
) -> LexRecord:
    return LexRecord(
        language=Language(language),
        word=word,
        sense_id=sense_id or f"{word}_1",
        usage=usage or f"An example usage of {word}.",
        definition=definition,
        period=period,
        is_novel_sense=novel,
        source=source,
    )


def make_split(
    records: list[LexRecord],
    name: SplitName = SplitName.TEST,
    language: str = "fi",
) -> DatasetSplit:
    return DatasetSplit(name=name, language=Language(language), records=records)


@pytest.fixture
def record_factory():
    return make_record


@pytest.fixture
def split_factory():
    return make_split
