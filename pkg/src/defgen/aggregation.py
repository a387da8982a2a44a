"""Collapse per-usage generated definitions into one label per sense.

For each (word, sense) the generated definitions are deduplicated into
candidates with frequencies, a prototype embedding is computed as the
frequency-weighted mean of the candidate embeddings, and candidates are
ranked by cosine similarity to that prototype.  Labels are then assigned
greedily per target word so that different senses of the same word get
different labels whenever the ranked candidate lists allow it; when a sense
exhausts its candidates, its most prototypical definition is reused with a
fallback flag.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

from .errors import (
    DimensionMismatch,
    EmptyGroup,
    EmptyInput,
    IoFailure,
    MalformedRow,
    ZeroVector,
)
from .inference import EmbeddingVector

logger = logging.getLogger(__name__)

GENERATIONS_HEADER = ("word", "sense_id", "usage_index", "definition")
PREDICTIONS_HEADER = ("word", "sense_id", "definition")

SIMILARITY_SENTINEL = -math.inf


class Ordering(str, Enum):
    PROTOTYPE_SIMILARITY = "prototype_similarity"
    FREQUENCY = "frequency"


@dataclass(frozen=True)
class DefinitionCandidate:
    text: str
    embedding: EmbeddingVector
    frequency: int = 1
    similarity_to_prototype: float = math.nan

    def __post_init__(self):
        if not self.text:
            raise ValueError("candidate text must be non-empty")
        if self.frequency < 1:
            raise ValueError("frequency must be >= 1")


@dataclass(frozen=True)
class SenseGroup:
    word: str
    sense_id: str
    candidates: tuple[DefinitionCandidate, ...]
    usage_count: int

    def __post_init__(self):
        texts = [c.text for c in self.candidates]
        if len(texts) != len(set(texts)):
            raise ValueError("candidate texts must be pairwise distinct")


@dataclass(frozen=True)
class SenseLabelAssignment:
    word: str
    sense_id: str
    label: str
    rank_used: int
    fallback: bool

    @property
    def triplet(self) -> "Triplet":
        return Triplet(self.word, self.sense_id, self.label)


class Triplet(NamedTuple):
    """A (target word, sense, definition) prediction."""

    word: str
    sense_id: str
    definition: str


class GenerationRecord(NamedTuple):
    """One generated definition for one usage; definition None when generation failed."""

    word: str
    sense_id: str
    usage_index: int
    definition: str | None


def mean_embedding(vectors: Sequence[EmbeddingVector]) -> EmbeddingVector:
    """Component-wise arithmetic mean; no normalization."""
    if not vectors:
        raise EmptyInput("cannot average zero vectors")
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    n = len(vectors)
    summed = [0.0] * vectors[0].dimension
    for vec in vectors:
        for i, value in enumerate(vec.values):
            summed[i] += value
    return EmbeddingVector(values=tuple(s / n for s in summed))


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity; equal vectors give exactly 1.0."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"{a.dimension} vs {b.dimension}")
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(x * x for x in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine undefined for zero-norm vectors")
    if a.values == b.values:
        return 1.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return dot / (norm_a * norm_b)


def _weighted_prototype(candidates: Sequence[DefinitionCandidate]) -> EmbeddingVector:
    """Frequency-weighted mean: each usage's generation contributes once."""
    if len(candidates) == 1:
        return candidates[0].embedding
    total = sum(c.frequency for c in candidates)
    summed = [0.0] * candidates[0].embedding.dimension
    for cand in candidates:
        for i, value in enumerate(cand.embedding.values):
            summed[i] += cand.frequency * value
    return EmbeddingVector(values=tuple(s / total for s in summed))


def rank_candidates(group: SenseGroup) -> SenseGroup:
    """Fill similarity_to_prototype and sort candidates.

    Sort key: similarity descending, frequency descending, text ascending.
    Zero-embedding candidates get a -inf similarity sentinel and rank last.
    """
    if not group.candidates:
        raise EmptyGroup(f"sense {group.word}/{group.sense_id} has no candidates")
    dims = {c.embedding.dimension for c in group.candidates}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
    prototype = _weighted_prototype(group.candidates)
    scored: list[DefinitionCandidate] = []
    for cand in group.candidates:
        try:
            similarity = cosine(cand.embedding, prototype)
        except ZeroVector:
            logger.warning(
                "zero-norm embedding for %s/%s candidate %r; ranking last",
                group.word,
                group.sense_id,
                cand.text[:40],
            )
            similarity = SIMILARITY_SENTINEL
        scored.append(replace(cand, similarity_to_prototype=similarity))
    scored.sort(key=lambda c: (-c.similarity_to_prototype, -c.frequency, c.text))
    return replace(group, candidates=tuple(scored))


def assign_sense_labels(
    groups: Sequence[SenseGroup],
    ordering: Ordering = Ordering.PROTOTYPE_SIMILARITY,
) -> list[SenseLabelAssignment]:
    """Greedy unique-label assignment for all senses of one target word.

    Groups are processed by usage count descending (sense_id breaks ties);
    each takes the first candidate, in the requested ordering, whose text no
    other sense of the word has claimed.  A sense whose candidates are all
    claimed falls back to its rank-0 candidate with ``fallback = True``.
    """
    if not groups:
        return []
    words = {g.word for g in groups}
    if len(words) != 1:
        raise ValueError(f"one target word per batch, got {sorted(words)}")
    ordering = Ordering(ordering)

    ranked = [rank_candidates(g) for g in groups]
    ranked.sort(key=lambda g: (-g.usage_count, g.sense_id))

    taken: set[str] = set()
    assignments: list[SenseLabelAssignment] = []
    for group in ranked:
        candidates = list(group.candidates)
        if ordering is Ordering.FREQUENCY:
            candidates.sort(
                key=lambda c: (-c.frequency, -c.similarity_to_prototype, c.text)
            )
        choice = next(
            (
                (rank, cand)
                for rank, cand in enumerate(candidates)
                if cand.text not in taken
            ),
            None,
        )
        if choice is None:
            rank, cand, fallback = 0, candidates[0], True
        else:
            (rank, cand), fallback = choice, False
        taken.add(cand.text)
        assignments.append(
            SenseLabelAssignment(
                word=group.word,
                sense_id=group.sense_id,
                label=cand.text,
                rank_used=rank,
                fallback=fallback,
            )
        )
    return assignments


def build_sense_groups(
    records: Iterable[GenerationRecord],
    embeddings: dict[str, EmbeddingVector],
) -> list[SenseGroup]:
    """Group generations by (word, sense), deduplicating texts into frequencies.

    Failed generations (definition None) are dropped; a sense whose
    generations all failed is skipped with a warning.
    """
    grouped: "OrderedDict[tuple[str, str], dict[str, int]]" = OrderedDict()
    for rec in records:
        counts = grouped.setdefault((rec.word, rec.sense_id), {})
        if rec.definition is None:
            continue
        counts[rec.definition] = counts.get(rec.definition, 0) + 1

    groups: list[SenseGroup] = []
    for (word, sense_id), counts in grouped.items():
        if not counts:
            logger.warning("all generations missing for %s/%s; skipping", word, sense_id)
            continue
        candidates = tuple(
            DefinitionCandidate(text=text, embedding=embeddings[text], frequency=freq)
            for text, freq in counts.items()
        )
        groups.append(
            SenseGroup(
                word=word,
                sense_id=sense_id,
                candidates=candidates,
                usage_count=sum(counts.values()),
            )
        )
    return groups


EmbedFn = Callable[[list[str]], list[EmbeddingVector]]


def aggregate_generations(
    records: Sequence[GenerationRecord],
    embed: EmbedFn,
    ordering: Ordering = Ordering.PROTOTYPE_SIMILARITY,
) -> list[SenseLabelAssignment]:
    """Full aggregation: embed distinct texts, rank, assign unique labels per word.

    Output is sorted by (word, sense_id) for stable files.
    """
    texts = list(
        dict.fromkeys(rec.definition for rec in records if rec.definition is not None)
    )
    vectors = embed(texts) if texts else []
    embeddings = dict(zip(texts, vectors))
    groups = build_sense_groups(records, embeddings)

    by_word: "OrderedDict[str, list[SenseGroup]]" = OrderedDict()
    for group in groups:
        by_word.setdefault(group.word, []).append(group)

    assignments: list[SenseLabelAssignment] = []
    for word_groups in by_word.values():
        assignments.extend(assign_sense_labels(word_groups, ordering))
    assignments.sort(key=lambda a: (a.word, a.sense_id))
    return assignments


def _sanitize(value: str) -> str:
    if any(ch in value for ch in "\t\n\r"):
        logger.warning("replacing embedded tab/newline in %r", value[:40])
        value = " ".join(value.split())
    return value


def write_generations(records: Sequence[GenerationRecord], path: str | Path) -> None:
    """TSV of per-usage generations; empty definition cell = failed generation."""
    lines = ["\t".join(GENERATIONS_HEADER)]
    for rec in records:
        lines.append(
            "\t".join(
                (
                    _sanitize(rec.word),
                    _sanitize(rec.sense_id),
                    str(rec.usage_index),
                    _sanitize(rec.definition) if rec.definition is not None else "",
                )
            )
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_generations(path: str | Path) -> list[GenerationRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != GENERATIONS_HEADER:
        raise MalformedRow(f"{path}: expected header {GENERATIONS_HEADER}", 1)
    records: list[GenerationRecord] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        row = line.split("\t")
        if len(row) != len(GENERATIONS_HEADER):
            raise MalformedRow(f"expected {len(GENERATIONS_HEADER)} fields", line_number)
        word, sense_id, usage_index, definition = row
        try:
            index = int(usage_index)
        except ValueError:
            raise MalformedRow(f"usage_index is not an integer: {usage_index!r}",
                               line_number) from None
        records.append(GenerationRecord(word, sense_id, index, definition or None))
    return records


def write_predictions(triplets: Sequence[Triplet], path: str | Path) -> None:
    """The submission-style predictions TSV: word, sense_id, definition."""
    lines = ["\t".join(PREDICTIONS_HEADER)]
    for item in triplets:
        lines.append(
            "\t".join(
                (_sanitize(item.word), _sanitize(item.sense_id), _sanitize(item.definition))
            )
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_predictions(path: str | Path) -> list[Triplet]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split("\t")) != PREDICTIONS_HEADER:
        raise MalformedRow(f"{path}: expected header {PREDICTIONS_HEADER}", 1)
    triplets: list[Triplet] = []
    for line_number, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        row = line.split("\t")
        if len(row) != len(PREDICTIONS_HEADER):
            raise MalformedRow(f"expected {len(PREDICTIONS_HEADER)} fields", line_number)
        triplets.append(Triplet(*row))
    return triplets
