"""From-scratch text-generation metrics.

Sentence BLEU with clipped n-gram precisions, order exclusion for short
hypotheses and epsilon smoothing for zero matches; greedy-matching BERTScore
over token embeddings (no idf weighting, no baseline rescaling); automatic
circularity detection; character-length statistics; and Welch's
unequal-variance t-test with the p-value from the regularized incomplete
beta function.

Scores live in [0, 1] here; reports scale them by 100 for presentation.
"""

from __future__ import annotations

import logging
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyReference,
    EmptySide,
    LengthMismatch,
)
from .util import contains_target

logger = logging.getLogger(__name__)

MAX_ORDER = 4
ZERO_MATCH_EPSILON = 0.1

Vector = Sequence[float]
TokensAndVectors = tuple[Sequence[str], Sequence[Vector]]


@dataclass(frozen=True)
class BleuBreakdown:
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    effective_orders: int
    score: float


@dataclass(frozen=True)
class BertScoreResult:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float


@dataclass(frozen=True)
class LengthStats:
    mean_prediction_chars: float
    mean_gold_chars: float
    ratio: float


def tokenize(text: str) -> list[str]:
    """Case-fold, make every punctuation character a standalone token, split on whitespace."""
    tokens: list[str] = []
    buf: list[str] = []

    def flush():
        if buf:
            tokens.append("".join(buf))
            buf.clear()

    for ch in text.casefold():
        if ch.isspace():
            flush()
        elif unicodedata.category(ch).startswith("P"):
            flush()
            tokens.append(ch)
        else:
            buf.append(ch)
    flush()
    return tokens


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def sentence_bleu(hypothesis: Sequence[str], reference: Sequence[str]) -> BleuBreakdown:
    """Sentence-level BLEU over up to 4-gram modified precisions.

    Orders where the hypothesis has no n-grams are excluded and the uniform
    weights renormalized over the remaining orders; orders with n-grams but
    zero matches use a numerator of ``ZERO_MATCH_EPSILON``.  An empty
    hypothesis scores 0 with a brevity-penalty sentinel of 0.
    """
    if not reference:
        raise EmptyReference("reference token list must be non-empty")
    if not hypothesis:
        return BleuBreakdown(
            precisions=(0.0, 0.0, 0.0, 0.0),
            brevity_penalty=0.0,
            effective_orders=0,
            score=0.0,
        )

    precisions = [0.0] * MAX_ORDER
    log_sum = 0.0
    effective_orders = 0
    for order in range(1, MAX_ORDER + 1):
        hyp_counts = _ngram_counts(hypothesis, order)
        total = sum(hyp_counts.values())
        if total == 0:
            continue
        effective_orders += 1
        ref_counts = _ngram_counts(reference, order)
        matched = sum(
            min(count, ref_counts[ngram]) for ngram, count in hyp_counts.items()
        )
        numerator = matched if matched > 0 else ZERO_MATCH_EPSILON
        precisions[order - 1] = numerator / total
        log_sum += math.log(precisions[order - 1])

    c, r = len(hypothesis), len(reference)
    brevity_penalty = 1.0 if c >= r else math.exp(1.0 - r / c)
    score = brevity_penalty * math.exp(log_sum / effective_orders)
    return BleuBreakdown(
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        effective_orders=effective_orders,
        score=score,
    )


def _dot(a: Vector, b: Vector) -> float:
    return sum(x * y for x, y in zip(a, b))


def _cosine_or_zero(a: Vector, b: Vector) -> float:
    """Cosine similarity; 0 when either side has zero norm, exact 1 for equal vectors."""
    norm_a = math.sqrt(_dot(a, a))
    norm_b = math.sqrt(_dot(b, b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    if list(a) == list(b):
        return 1.0
    return _dot(a, b) / (norm_a * norm_b)


def bertscore_greedy(cand: TokensAndVectors, ref: TokensAndVectors) -> BertScoreResult:
    """Greedy-matching BERTScore from per-token embeddings.

    Recall averages, over reference tokens, the best cosine similarity to any
    candidate token; precision is the mirror image.  No idf weighting and no
    baseline rescaling are applied.
    """
    cand_tokens, cand_vectors = cand
    ref_tokens, ref_vectors = ref
    if not cand_tokens or not ref_tokens:
        raise EmptySide("both candidate and reference must have at least one token")
    if len(cand_tokens) != len(cand_vectors) or len(ref_tokens) != len(ref_vectors):
        raise DimensionMismatch("token and vector lists must have equal lengths")
    dims = {len(v) for v in cand_vectors} | {len(v) for v in ref_vectors}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent embedding dimensions: {sorted(dims)}")

    sim = [
        [_cosine_or_zero(cv, rv) for rv in ref_vectors] for cv in cand_vectors
    ]
    precision = sum(max(row) for row in sim) / len(cand_vectors)
    recall = sum(
        max(sim[i][j] for i in range(len(cand_vectors))) for j in range(len(ref_vectors))
    ) / len(ref_vectors)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return BertScoreResult(precision=precision, recall=recall, f1=f1)


def detect_circularity(definition: str, word: str, stem_min: int = 4) -> bool:
    """True when the definition contains the word being defined.

    A case-folded token match counts, as does a token starting with the
    target's stem (first ``max(stem_min, len(word) - 2)`` characters);
    ``stem_min = 0`` restricts detection to exact token matches.
    """
    if not word:
        raise EmptyInput("target word must be non-empty")
    return contains_target(definition, word, stem_min)


def length_stats(predictions: Sequence[str], golds: Sequence[str]) -> LengthStats:
    """Mean character lengths of both sides and their prediction/gold ratio."""
    if len(predictions) != len(golds):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(golds)} golds"
        )
    if not predictions:
        raise EmptyInput("need at least one prediction-gold pair")
    mean_pred = sum(len(p) for p in predictions) / len(predictions)
    mean_gold = sum(len(g) for g in golds) / len(golds)
    if mean_gold == 0:
        ratio = 0.0 if mean_pred == 0 else math.inf
    else:
        ratio = mean_pred / mean_gold
    return LengthStats(
        mean_prediction_chars=mean_pred, mean_gold_chars=mean_gold, ratio=ratio
    )


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued-fraction core of the incomplete beta function (modified Lentz)."""
    max_iterations = 300
    tiny = 1e-300
    eps = 3e-16
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iterations + 1):
        m2 = 2 * m
        numerator = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        numerator = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + numerator * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + numerator / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    logger.warning("incomplete beta continued fraction did not converge")
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), computed via the continued fraction on the fast-converging side."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _sample_variance(values: Sequence[float], mean: float) -> float:
    return sum((v - mean) ** 2 for v in values) / (len(values) - 1)


def welch_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided Welch's t-test for two independent samples.

    Degenerate variances are handled by convention: both zero with equal
    means gives t = 0, p = 1; both zero with different means gives a p = 0
    sentinel with a warning.
    """
    if len(a) < 2 or len(b) < 2:
        raise EmptyInput("each sample needs at least 2 elements")
    n_a, n_b = len(a), len(b)
    mean_a = sum(a) / n_a
    mean_b = sum(b) / n_b
    var_a = _sample_variance(a, mean_a)
    var_b = _sample_variance(b, mean_b)
    conventional_df = float(n_a + n_b - 2)

    if var_a == 0.0 and var_b == 0.0:
        if mean_a == mean_b:
            return TTestResult(0.0, conventional_df, 1.0)
        logger.warning("zero variances with different means; reporting p = 0 sentinel")
        t = math.inf if mean_a > mean_b else -math.inf
        return TTestResult(t, conventional_df, 0.0)

    se_a = var_a / n_a
    se_b = var_b / n_b
    t = (mean_a - mean_b) / math.sqrt(se_a + se_b)
    df = (se_a + se_b) ** 2 / (se_a**2 / (n_a - 1) + se_b**2 / (n_b - 1))
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return TTestResult(t_statistic=t, degrees_of_freedom=df, p_value=min(1.0, p))
