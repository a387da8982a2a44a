"""Per-language prompt construction and fine-tuning exports.

A prompt is the usage example followed by a short question naming the target
word.  The stock templates carry a leading period for Finnish and German, so
they read as a new sentence after the usage.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

from .corpus import DatasetSplit, Language, LexRecord
from .errors import IoFailure, LanguageMismatch, UnsupportedLanguage

PLACEHOLDER = "<target>"

DEFAULT_TEMPLATES: dict[str, str] = {
    "ru": "Что такое <target>?",
    "fi": ". Mitä tarkoittaa <target>?",
    "de": ". Was ist die Definition von <target>?",
}

# Rejected Finnish variant; kept as a named alternative because it biases
# generations toward noun-like definitions.
ALTERNATIVE_TEMPLATES: dict[str, str] = {
    "fi_what_is": "Mikä on <target>?",
}


@dataclass(frozen=True)
class PromptTemplate:
    """A per-language template containing the ``<target>`` placeholder once."""

    language: Language
    template: str
    joiner: str = " "

    def __post_init__(self):
        if self.template.count(PLACEHOLDER) != 1:
            raise ValueError(
                f"template must contain {PLACEHOLDER!r} exactly once: {self.template!r}"
            )


@dataclass(frozen=True)
class FinetuneExample:
    input_text: str
    target_text: str

    def __post_init__(self):
        if not self.input_text or not self.target_text:
            raise ValueError("fine-tuning example fields must be non-empty")


@dataclass(frozen=True)
class TrainerConfig:
    """Adapter fine-tuning settings for an external trainer.

    Defaults are the encoder-decoder values; decoder-only models were tuned
    with weight_decay 0.001 and learning_rate 1e-4 (see DECODER_ONLY_OVERRIDES).
    """

    epochs: int = 1
    weight_decay: float = 0.0
    learning_rate: float = 5e-5
    warmup_ratio: float = 0.05
    batch_size: int = 16
    optimizer: str = "paged_adamw_8bit"
    lora_rank: int = 256
    lora_alpha: int = 512
    lora_dropout: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be > 0 and weight_decay >= 0")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ValueError("warmup_ratio must lie in [0, 1]")
        if self.lora_rank < 1 or self.lora_alpha < 1:
            raise ValueError("lora_rank and lora_alpha must be >= 1")
        if not 0.0 <= self.lora_dropout < 1.0:
            raise ValueError("lora_dropout must lie in [0, 1)")


DECODER_ONLY_OVERRIDES = {"weight_decay": 0.001, "learning_rate": 1e-4}


class ExportCount(NamedTuple):
    written: int
    skipped: int


def default_prompt(language: Language, joiner: str = " ") -> PromptTemplate:
    """The stock template for ``fi``, ``ru`` or ``de``."""
    try:
        template = DEFAULT_TEMPLATES[language.code]
    except KeyError:
        raise UnsupportedLanguage(
            f"no stock template for {language.code!r}; supply a custom PromptTemplate"
        ) from None
    return PromptTemplate(language=language, template=template, joiner=joiner)


def build_prompt(record: LexRecord, template: PromptTemplate) -> str:
    """Usage + joiner + template with the placeholder replaced by the target word.

    Substitution is literal; no other normalization is applied.
    """
    if template.language != record.language:
        raise LanguageMismatch(
            f"template is {template.language.code!r} but record is {record.language.code!r}"
        )
    return record.usage + template.joiner + template.template.replace(PLACEHOLDER, record.word)


def export_finetune_dataset(
    split: DatasetSplit, template: PromptTemplate, path: str | Path
) -> ExportCount:
    """Write JSON-lines of {"input": prompt, "output": gold definition}.

    Records without a definition cannot be training examples; they are
    skipped and counted.
    """
    written = 0
    skipped = 0
    lines: list[str] = []
    for rec in split.records:
        if rec.definition is None:
            skipped += 1
            continue
        example = FinetuneExample(
            input_text=build_prompt(rec, template), target_text=rec.definition
        )
        lines.append(
            json.dumps(
                {"input": example.input_text, "output": example.target_text},
                ensure_ascii=False,
            )
        )
        written += 1
    try:
        Path(path).write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8", newline="\n"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return ExportCount(written=written, skipped=skipped)


def export_trainer_config(overrides: dict | None, path: str | Path) -> TrainerConfig:
    """Write the trainer configuration JSON (defaults merged with overrides)."""
    config = TrainerConfig(**(overrides or {}))
    payload = asdict(config)
    payload["notes"] = "QLoRA adapters applied to all linear layers"
    payload["alternatives"] = {"decoder_only": DECODER_ONLY_OVERRIDES}
    try:
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return config
