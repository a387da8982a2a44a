"""End-to-end scoring of (word, sense, definition) predictions against gold.

Predictions are joined to gold senses on (word, sense_id); matched pairs are
scored with sentence BLEU and greedy BERTScore over token embeddings, gold
senses without a prediction score 0 on everything (dropping them instead
would inflate the aggregates), and extra predictions are warned about but
not penalized.  Aggregates are reported scaled by 100.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .aggregation import Triplet
from .corpus import DatasetSplit
from .errors import IoFailure
from .inference import EmbeddingVector, HashTokenEmbedder
from .metrics import (
    TTestResult,
    bertscore_greedy,
    detect_circularity,
    length_stats,
    sentence_bleu,
    tokenize,
    welch_ttest,
)
from .util import format_share

logger = logging.getLogger(__name__)

METRIC_NAMES = ("bleu", "bertscore_precision", "bertscore_recall", "bertscore_f1")


class TokenEmbedder(Protocol):
    def embed_tokens(self, text: str) -> tuple[list[str], list[EmbeddingVector]]: ...


@dataclass(frozen=True)
class GoldItem:
    word: str
    sense_id: str
    definition: str

    def __post_init__(self):
        if not self.definition.strip():
            raise ValueError("gold definition must be non-empty")


@dataclass(frozen=True)
class ItemScore:
    word: str
    sense_id: str
    bleu: float
    bertscore_precision: float
    bertscore_recall: float
    bertscore_f1: float
    matched: bool

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {name!r}; choose from {METRIC_NAMES}")
        return getattr(self, name)


@dataclass
class ScoreReport:
    """Per-item scores in [0, 1] plus aggregates scaled by 100."""

    per_item: list[ItemScore]
    aggregates: dict[str, float]
    coverage: float
    circularity_rate: float | None
    length_ratio: float | None
    extra_predictions: int = 0
    system: str = "predictions"

    def item_values(self, metric: str) -> list[float]:
        return [item.metric(metric) for item in self.per_item]


@dataclass(frozen=True)
class ErrorReport:
    total_predictions: int
    circular_count: int
    circularity_rate: float
    mean_prediction_chars: float | None
    mean_gold_chars: float | None
    length_ratio: float | None
    labeled_count: int
    fluency_share: float | None
    adequacy_share: float | None

    def as_dict(self) -> dict:
        return {
            "total_predictions": self.total_predictions,
            "circular_count": self.circular_count,
            "circularity_rate": self.circularity_rate,
            "circularity_rate_formatted": format_share(self.circularity_rate),
            "mean_prediction_chars": self.mean_prediction_chars,
            "mean_gold_chars": self.mean_gold_chars,
            "length_ratio": self.length_ratio,
            "labeled_count": self.labeled_count,
            "fluency_share": self.fluency_share,
            "fluency_share_formatted": None
            if self.fluency_share is None
            else format_share(self.fluency_share),
            "adequacy_share": self.adequacy_share,
            "adequacy_share_formatted": None
            if self.adequacy_share is None
            else format_share(self.adequacy_share),
        }


def load_gold(split: DatasetSplit) -> list[GoldItem]:
    """One gold item per distinct novel (word, sense) with a definition.

    Duplicate senses keep their first definition; a split without any novel
    senses yields an empty list with a warning.
    """
    items: dict[tuple[str, str], GoldItem] = {}
    for rec in split.records:
        if not rec.is_novel_sense or rec.definition is None:
            continue
        key = (rec.word, rec.sense_id)
        if key not in items:
            items[key] = GoldItem(
                word=rec.word, sense_id=rec.sense_id, definition=rec.definition
            )
    if not items:
        logger.warning("split %s has no novel senses with definitions", split.name.value)
    return list(items.values())


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def score_predictions(
    predictions: Sequence[Triplet],
    gold: Sequence[GoldItem],
    token_embedder: TokenEmbedder | None = None,
    stem_min: int = 4,
) -> ScoreReport:
    """Score the predictions against the gold senses.

    ``token_embedder`` provides per-token vectors for BERTScore; when None, a
    deterministic hash embedder is used (fine for exact-match checks, not for
    real evaluation).
    """
    if token_embedder is None:
        logger.warning(
            "no token-embedding service configured; BERTScore uses hash embeddings"
        )
        token_embedder = HashTokenEmbedder()

    by_key = {(p.word, p.sense_id): p.definition for p in predictions}
    gold_keys = {(g.word, g.sense_id) for g in gold}
    extra = [key for key in by_key if key not in gold_keys]
    if extra:
        logger.warning("%d predictions have no matching gold sense", len(extra))

    per_item: list[ItemScore] = []
    matched_pairs: list[tuple[str, str]] = []
    for item in gold:
        key = (item.word, item.sense_id)
        predicted = by_key.get(key)
        if predicted is None:
            per_item.append(
                ItemScore(item.word, item.sense_id, 0.0, 0.0, 0.0, 0.0, matched=False)
            )
            continue
        bleu = sentence_bleu(tokenize(predicted), tokenize(item.definition)).score
        bert = bertscore_greedy(
            token_embedder.embed_tokens(predicted),
            token_embedder.embed_tokens(item.definition),
        )
        per_item.append(
            ItemScore(
                item.word,
                item.sense_id,
                bleu,
                bert.precision,
                bert.recall,
                bert.f1,
                matched=True,
            )
        )
        matched_pairs.append((predicted, item.definition))

    aggregates = {
        name: 100.0 * _mean([item.metric(name) for item in per_item])
        for name in METRIC_NAMES
    }
    coverage = (
        sum(1 for item in per_item if item.matched) / len(gold) if gold else 1.0
    )
    circularity_rate = None
    if predictions:
        circular = sum(
            1 for p in predictions if detect_circularity(p.definition, p.word, stem_min)
        )
        circularity_rate = 100.0 * circular / len(predictions)
    length_ratio = None
    if matched_pairs:
        length_ratio = length_stats(
            [p for p, _ in matched_pairs], [g for _, g in matched_pairs]
        ).ratio
    return ScoreReport(
        per_item=per_item,
        aggregates=aggregates,
        coverage=coverage,
        circularity_rate=circularity_rate,
        length_ratio=length_ratio,
        extra_predictions=len(extra),
    )


def compare_systems(
    report_a: ScoreReport, report_b: ScoreReport, metric: str = "bertscore_f1"
) -> TTestResult:
    """Welch's t-test over the two systems' per-item scores for ``metric``.

    Items are aligned on the union of (word, sense_id) keys; a system missing
    a key contributes 0 for it (with a warning), so systems with different
    coverage stay comparable.
    """
    a_by_key = {(i.word, i.sense_id): i.metric(metric) for i in report_a.per_item}
    b_by_key = {(i.word, i.sense_id): i.metric(metric) for i in report_b.per_item}
    keys = sorted(set(a_by_key) | set(b_by_key))
    if set(a_by_key) != set(b_by_key):
        logger.warning("reports cover different gold keys; missing items filled with 0")
    sample_a = [a_by_key.get(k, 0.0) for k in keys]
    sample_b = [b_by_key.get(k, 0.0) for k in keys]
    return welch_ttest(sample_a, sample_b)


def load_label_file(path: str | Path) -> list[dict]:
    """Parse an annotation label export (JSON-lines)."""
    labels = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            labels.append(json.loads(line))
    return labels


def error_report(
    predictions: Sequence[Triplet],
    gold: Sequence[GoldItem],
    stem_min: int = 4,
    labels: Iterable[Mapping] | None = None,
) -> ErrorReport:
    """Automatic circularity + length statistics, plus human-label shares.

    Circularity is computed over the full prediction set; fluency/adequacy
    shares require an annotation label file and are reported as absent
    otherwise.
    """
    circular = sum(
        1 for p in predictions if detect_circularity(p.definition, p.word, stem_min)
    )
    rate = 100.0 * circular / len(predictions) if predictions else 0.0

    gold_by_key = {(g.word, g.sense_id): g.definition for g in gold}
    pairs = [
        (p.definition, gold_by_key[(p.word, p.sense_id)])
        for p in predictions
        if (p.word, p.sense_id) in gold_by_key
    ]
    mean_pred = mean_gold = ratio = None
    if pairs:
        stats = length_stats([p for p, _ in pairs], [g for _, g in pairs])
        mean_pred, mean_gold, ratio = (
            stats.mean_prediction_chars,
            stats.mean_gold_chars,
            stats.ratio,
        )

    labeled = 0
    fluency_share = adequacy_share = None
    if labels is not None:
        label_list = list(labels)
        labeled = len(label_list)
        if labeled:
            fluency_share = 100.0 * sum(
                1 for lab in label_list if lab.get("fluency_issue")
            ) / labeled
            adequacy_share = 100.0 * sum(
                1 for lab in label_list if lab.get("adequacy_issue")
            ) / labeled

    return ErrorReport(
        total_predictions=len(predictions),
        circular_count=circular,
        circularity_rate=rate,
        mean_prediction_chars=mean_pred,
        mean_gold_chars=mean_gold,
        length_ratio=ratio,
        labeled_count=labeled,
        fluency_share=fluency_share,
        adequacy_share=adequacy_share,
    )


def _json_safe(value: float | None) -> float | None:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return value


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "system": report.system,
        "aggregates": report.aggregates,
        "coverage": report.coverage,
        "circularity_rate": _json_safe(report.circularity_rate),
        "length_ratio": _json_safe(report.length_ratio),
        "extra_predictions": report.extra_predictions,
        "per_item": [
            {
                "word": item.word,
                "sense_id": item.sense_id,
                "bleu": item.bleu,
                "bertscore_precision": item.bertscore_precision,
                "bertscore_recall": item.bertscore_recall,
                "bertscore_f1": item.bertscore_f1,
                "matched": item.matched,
            }
            for item in report.per_item
        ],
    }


def report_from_dict(payload: Mapping) -> ScoreReport:
    per_item = [
        ItemScore(
            word=entry["word"],
            sense_id=entry["sense_id"],
            bleu=entry["bleu"],
            bertscore_precision=entry["bertscore_precision"],
            bertscore_recall=entry["bertscore_recall"],
            bertscore_f1=entry["bertscore_f1"],
            matched=entry["matched"],
        )
        for entry in payload["per_item"]
    ]
    return ScoreReport(
        per_item=per_item,
        aggregates=dict(payload["aggregates"]),
        coverage=payload["coverage"],
        circularity_rate=payload.get("circularity_rate"),
        length_ratio=payload.get("length_ratio"),
        extra_predictions=payload.get("extra_predictions", 0),
        system=payload.get("system", "predictions"),
    )


def read_report(path: str | Path) -> ScoreReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _aggregate_row(report: ScoreReport) -> str:
    return " / ".join(f"{report.aggregates[name]:.2f}" for name in METRIC_NAMES)


def emit_report(
    report: ScoreReport, path: str | Path, format: str = "json"
) -> None:
    """Serialize a score report as json, tsv or a markdown table."""
    path = Path(path)
    if format == "json":
        text = json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n"
    elif format == "tsv":
        lines = ["\t".join(("word", "sense_id") + METRIC_NAMES)]
        for item in report.per_item:
            lines.append(
                "\t".join(
                    (item.word, item.sense_id)
                    + tuple(f"{item.metric(name) * 100:.2f}" for name in METRIC_NAMES)
                )
            )
        lines.append(
            "\t".join(
                ("AGGREGATE", "")
                + tuple(f"{report.aggregates[name]:.2f}" for name in METRIC_NAMES)
            )
        )
        lines.append(f"COVERAGE\t\t{report.coverage:.4f}")
        text = "\n".join(lines) + "\n"
    elif format == "markdown_table":
        text = (
            "| System | BLEU / BERTScore P / R / F1 | Coverage |\n"
            "| --- | --- | --- |\n"
            f"| {report.system} | {_aggregate_row(report)} | {report.coverage:.2f} |\n"
        )
    else:
        raise ValueError(f"unknown report format {format!r}")
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
