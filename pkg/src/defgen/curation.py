"""Training-set assembly: contamination removal, sentence filtering, recipes.

Held-out evaluation words are removed from training material wholesale (every
sense, definition and usage of a blocked word).  Long multi-sentence usages
can be reduced to the sentences that actually contain the target word, using
a dependency-free rule-based sentence splitter with per-language abbreviation
guards.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .corpus import DatasetSplit, LexRecord, SplitName
from .errors import IoFailure, LanguageMismatch, MissingIngredient
from .util import contains_target

logger = logging.getLogger(__name__)

SENTENCE_TERMINALS = ".!?…"
_CLOSERS = "\"'»”’›)]"
_OPENERS = set("\"'«„“‘‚‹([¿¡")

# Minimal built-in abbreviation guards; extend via plain-text files
# (one entry per line) and the guards= parameter.
DEFAULT_ABBREVIATIONS: dict[str, tuple[str, ...]] = {
    "de": (
        "z. B.", "z.B.", "d. h.", "d.h.", "u. a.", "u.a.", "bzw.", "usw.",
        "ca.", "vgl.", "Dr.", "Prof.", "Nr.", "St.", "evtl.", "ggf.",
    ),
    "fi": ("esim.", "mm.", "jne.", "ns.", "yms.", "ym.", "n."),
    "ru": (
        "т. е.", "т.е.", "т. д.", "т.д.",
        "т. п.", "т.п.", "г.", "др.",
    ),
    "": ("etc.", "e.g.", "i.e.", "cf.", "vs."),
}


def default_guards(language_code: str = "") -> tuple[str, ...]:
    """Built-in abbreviation guard list for a language (plus the shared base)."""
    return DEFAULT_ABBREVIATIONS.get(language_code, ()) + DEFAULT_ABBREVIATIONS[""]


def load_guard_file(path: str | Path) -> tuple[str, ...]:
    """Load an abbreviation guard list: plain text, one entry per line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return tuple(line.strip() for line in lines if line.strip())


@dataclass(frozen=True)
class ContaminationIndex:
    """Case-folded words blocked from training data."""

    blocked_words: frozenset[str]

    def __contains__(self, word: str) -> bool:
        return word.casefold() in self.blocked_words


@dataclass
class RemovalReport:
    """Blocked word -> number of training records dropped for it."""

    removed: dict[str, int] = field(default_factory=dict)

    @property
    def words_removed(self) -> int:
        return len(self.removed)

    @property
    def records_removed(self) -> int:
        return sum(self.removed.values())

    def write_json(self, path: str | Path) -> None:
        try:
            Path(path).write_text(
                json.dumps(self.removed, ensure_ascii=False, sort_keys=True, indent=2)
                + "\n",
                encoding="utf-8",
            )
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc


class Recipe(str, Enum):
    A = "a"
    A_PLUS_D = "a_plus_d"
    D = "d"


def build_contamination_index(heldout: Iterable[DatasetSplit]) -> ContaminationIndex:
    """Union of case-folded words over every record of every held-out split."""
    blocked = {rec.word.casefold() for split in heldout for rec in split.records}
    return ContaminationIndex(blocked_words=frozenset(b for b in blocked if b))


def contamination_filter(
    split: DatasetSplit, index: ContaminationIndex
) -> tuple[DatasetSplit, RemovalReport]:
    """Drop every record whose case-folded word is blocked; survivors keep order."""
    survivors: list[LexRecord] = []
    removed: dict[str, int] = {}
    for rec in split.records:
        folded = rec.word.casefold()
        if folded in index.blocked_words:
            removed[folded] = removed.get(folded, 0) + 1
        else:
            survivors.append(rec)
    filtered = DatasetSplit(name=split.name, language=split.language, records=survivors)
    return filtered, RemovalReport(removed=removed)


def split_into_sentences(text: str, guards: Sequence[str] = ()) -> list[str]:
    """Rule-based sentence splitting.

    A boundary is a run of sentence-final punctuation (``. ! ? …``, possibly
    followed by closing quotes/brackets) followed by whitespace and then an
    uppercase letter or opening quote.  Terminal characters inside any guard
    occurrence never split.  Joining the result with single spaces preserves
    every non-whitespace character of the input.
    """
    if not text.strip():
        return []
    protected: set[int] = set()
    for guard in guards:
        if not guard:
            continue
        start = 0
        while (idx := text.find(guard, start)) >= 0:
            # Anchor at a word boundary so "n." does not match inside "päivän."
            if idx == 0 or not text[idx - 1].isalnum():
                for offset, ch in enumerate(guard):
                    if ch in SENTENCE_TERMINALS:
                        protected.add(idx + offset)
            start = idx + 1

    pieces: list[str] = []
    prev = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in SENTENCE_TERMINALS and i not in protected:
            j = i + 1
            while j < n and (text[j] in SENTENCE_TERMINALS or text[j] in _CLOSERS):
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k > j and k < n and (text[k].isupper() or text[k] in _OPENERS):
                pieces.append(text[prev:j])
                prev = k
                i = k
                continue
            i = j
        else:
            i += 1
    pieces.append(text[prev:])
    return [piece.strip() for piece in pieces if piece.strip()]


LemmaMatcher = Callable[[str, str], bool]


def make_lemma_matcher(stem_min: int = 4) -> LemmaMatcher:
    """Matcher: sentence contains the target if a token equals it or starts
    with its stem (first ``max(stem_min, len - 2)`` case-folded characters)."""

    def matcher(sentence: str, word: str) -> bool:
        return contains_target(sentence, word, stem_min)

    return matcher


def filter_usage_sentences(
    record: LexRecord,
    lemma_matcher: LemmaMatcher | None = None,
    *,
    guards: Sequence[str] | None = None,
) -> LexRecord:
    """Reduce the usage to the sentences containing the target word.

    If no sentence matches, the original usage is kept and a warning logged
    (an empty usage would be worse than a long one).
    """
    matcher = lemma_matcher or make_lemma_matcher()
    if guards is None:
        guards = default_guards(record.language.code)
    sentences = split_into_sentences(record.usage, guards)
    matching = [s for s in sentences if matcher(s, record.word)]
    if not matching:
        logger.warning(
            "no usage sentence contains target %r; keeping full usage", record.word
        )
        return record
    new_usage = " ".join(matching)
    return record if new_usage == record.usage else replace(record, usage=new_usage)


def assemble_training_set(
    axolotl_train: DatasetSplit | None,
    lexicon: DatasetSplit | None,
    recipe: Recipe,
) -> DatasetSplit:
    """Concatenate training ingredients per recipe and drop exact duplicates.

    Order is shared-task data first, then lexicon; duplicates by
    (word, sense_id, usage) keep the first occurrence.
    """
    recipe = Recipe(recipe)
    if recipe in (Recipe.A, Recipe.A_PLUS_D) and axolotl_train is None:
        raise MissingIngredient(f"recipe {recipe.value!r} requires the shared-task training split")
    if recipe in (Recipe.D, Recipe.A_PLUS_D) and lexicon is None:
        raise MissingIngredient(f"recipe {recipe.value!r} requires the lexicon split")

    parts: list[DatasetSplit] = []
    if recipe in (Recipe.A, Recipe.A_PLUS_D):
        parts.append(axolotl_train)
    if recipe in (Recipe.D, Recipe.A_PLUS_D):
        parts.append(lexicon)
    language = parts[0].language
    for part in parts[1:]:
        if part.language != language:
            raise LanguageMismatch(
                f"cannot combine splits for {language.code!r} and {part.language.code!r}"
            )

    seen: set[tuple[str, str, str]] = set()
    records: list[LexRecord] = []
    for part in parts:
        for rec in part.records:
            key = (rec.word, rec.sense_id, rec.usage)
            if key in seen:
                continue
            seen.add(key)
            records.append(rec)
    name = SplitName.TRAIN_A if recipe is Recipe.A else SplitName.TRAIN_AD
    return DatasetSplit(name=name, language=language, records=records)
