"""Small shared helpers: target-word matching and percentage formatting."""

from __future__ import annotations

import json
import re
from typing import Any

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def match_tokens(text: str) -> list[str]:
    """Case-folded alphanumeric tokens of ``text``, for target-word matching."""
    return _WORD_RE.findall(text.casefold())


def target_stem(word: str, stem_min: int) -> str:
    """Prefix of the case-folded target used for inflection-tolerant matching.

    The stem is the first ``max(stem_min, len(word) - 2)`` characters, so
    longer words shed up to two trailing characters while short words are
    matched (almost) whole.
    """
    folded = word.casefold()
    return folded[: max(stem_min, len(folded) - 2)]


def contains_target(text: str, word: str, stem_min: int) -> bool:
    """True if any token of ``text`` is the target word or starts with its stem.

    ``stem_min = 0`` disables stem matching: only exact token equality counts.
    """
    folded = word.casefold()
    tokens = match_tokens(text)
    if stem_min <= 0:
        return folded in tokens
    stem = target_stem(word, stem_min)
    return any(tok == folded or tok.startswith(stem) for tok in tokens)


def format_share(value: float) -> str:
    """Format a percentage in [0, 100] to three significant figures.

    Reproduces the mixed precisions seen in hand-tallied share tables:
    5/32 -> "15.6", 2/30 -> "6.67", 13/32 -> "40.6".
    """
    return f"{value:.3g}"


def canonical_json(obj: Any) -> str:
    """Deterministic JSON encoding (sorted keys, no whitespace padding)."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
