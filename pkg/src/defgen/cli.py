"""Single executable exposing the pipeline as subcommands.

Every option can also come from a JSON config file (flat object keyed by the
option name with underscores); explicit command-line flags win.  All
randomness is seeded through flags/config, never ambient.  Exit codes:
0 success, 1 user error, 2 runtime failure.  Logs go to stderr; ``--dry-run``
prints the resolved plan without side effects.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import click
from click.core import ParameterSource

from . import aggregation, annotation, corpus, curation, harness, inference, prompting
from .errors import ConfigError, EmptyInput, PipelineError, UserError

logger = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    """Flat key -> value defaults shared by all subcommands."""

    values: dict[str, Any] = field(default_factory=dict)
    path: Path | None = None
    dry_run: bool = False

    @classmethod
    def load(cls, path: str | None, dry_run: bool) -> "PipelineConfig":
        if path is None:
            return cls(dry_run=dry_run)
        file_path = Path(path)
        if not file_path.exists():
            raise ConfigError(f"config file not found: {file_path}", key="config")
        try:
            values = json.loads(file_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}", key="config")
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object", key="config")
        return cls(values=values, path=file_path, dry_run=dry_run)


def _resolve(ctx: click.Context, key: str, flag_value, *, required: bool = False):
    """Flag if given explicitly, else config value, else the flag's default."""
    source = ctx.get_parameter_source(key)
    if source is ParameterSource.COMMANDLINE:
        value = flag_value
    else:
        config: PipelineConfig = ctx.obj
        value = config.values.get(key, flag_value)
    if required and value in (None, (), []):
        raise ConfigError(f"missing required setting {key!r}", key=key)
    return value


def _input_path(value: str, key: str) -> Path:
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"{key}: input path does not exist: {path}", key=key)
    return path


def _print_json(payload: Any) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2, default=str))


def _dry_run(ctx: click.Context, plan: dict) -> bool:
    if ctx.obj.dry_run:
        _print_json({"dry_run": True, **plan})
        return True
    return False


def _endpoint(base_url: str, model: str, timeout: float, max_retries: int,
              max_in_flight: int) -> inference.EndpointConfig:
    return inference.EndpointConfig(
        base_url=base_url,
        model_name=model,
        timeout=timeout,
        max_retries=max_retries,
        max_in_flight=max_in_flight,
    )


@click.group()
@click.option("--config", "config_path", type=str, default=None,
              help="JSON config file with default option values.")
@click.option("--dry-run", is_flag=True, help="Print the resolved plan; do nothing.")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, dry_run: bool, verbose: bool):
    """Definition-generation pipeline: data prep, generation, aggregation, scoring."""
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = PipelineConfig.load(config_path, dry_run)


@cli.command()
@click.option("--input", "input_path", required=False, help="Source data file.")
@click.option("--format", "input_format", type=click.Choice(["axolotl", "lexicon"]),
              default="axolotl", show_default=True)
@click.option("--language", default=None, help="Language code, e.g. fi/ru/de.")
@click.option("--split-name", type=click.Choice([s.value for s in corpus.SplitName]),
              default="test", show_default=True)
@click.option("--out", default=None, help="Canonical split TSV to write.")
@click.option("--lenient", is_flag=True, help="Skip malformed rows instead of failing.")
@click.option("--col-word", default="word", show_default=True)
@click.option("--col-sense", default="sense_id", show_default=True)
@click.option("--col-usage", default="example", show_default=True)
@click.option("--col-definition", default="gloss", show_default=True)
@click.option("--col-period", default="period", show_default=True)
@click.option("--col-novel", default="novel", show_default=True)
@click.pass_context
def prepare(ctx, input_path, input_format, language, split_name, out, lenient,
            col_word, col_sense, col_usage, col_definition, col_period, col_novel):
    """Ingest a raw dataset file into the canonical split TSV."""
    input_path = _resolve(ctx, "input_path", input_path, required=True)
    language = _resolve(ctx, "language", language, required=True)
    out = _resolve(ctx, "out", out, required=True)
    plan = {"command": "prepare", "input": input_path, "format": input_format, "out": out}
    if _dry_run(ctx, plan):
        return
    src = _input_path(input_path, "input")
    lang = corpus.Language(language)
    name = corpus.SplitName(split_name)
    if input_format == "axolotl":
        columns = corpus.ColumnMap(
            word=col_word, sense_id=col_sense, usage=col_usage,
            definition=col_definition, period=col_period, novel_flag=col_novel,
        )
        split = corpus.parse_axolotl_tsv(src, lang, columns, name=name, lenient=lenient)
    else:
        split = corpus.parse_flat_lexicon(src, lang, name=name, lenient=lenient)
    corpus.write_split(split, out)
    stats = corpus.split_stats(split)
    _print_json({"written": out, "records": stats.records, "words": stats.words,
                 "senses": stats.senses, "with_definition": stats.with_definition})


@cli.command()
@click.option("--train", default=None, help="Canonical shared-task training split.")
@click.option("--lexicon", default=None, help="Canonical lexicon split.")
@click.option("--heldout", multiple=True,
              help="Canonical dev/test splits whose words must not leak (repeatable).")
@click.option("--recipe", type=click.Choice([r.value for r in curation.Recipe]),
              required=False)
@click.option("--out", default=None)
@click.option("--report", "report_path", default=None, help="Removal report JSON.")
@click.option("--filter-usages", is_flag=True,
              help="Keep only usage sentences containing the target word.")
@click.option("--stem-min", type=int, default=4, show_default=True)
@click.option("--guards", "guards_path", default=None,
              help="Abbreviation guard list (plain text, one per line).")
@click.pass_context
def curate(ctx, train, lexicon, heldout, recipe, out, report_path, filter_usages,
           stem_min, guards_path):
    """Assemble a decontaminated training set from the configured ingredients."""
    recipe = curation.Recipe(_resolve(ctx, "recipe", recipe, required=True))
    train = _resolve(ctx, "train", train)
    lexicon = _resolve(ctx, "lexicon", lexicon)
    heldout = _resolve(ctx, "heldout", tuple(heldout))
    out = _resolve(ctx, "out", out, required=True)
    if recipe in (curation.Recipe.A, curation.Recipe.A_PLUS_D) and not train:
        raise ConfigError(f"recipe {recipe.value!r} needs --train", key="train")
    if recipe in (curation.Recipe.D, curation.Recipe.A_PLUS_D) and not lexicon:
        raise ConfigError(f"recipe {recipe.value!r} needs --lexicon", key="lexicon")
    plan = {"command": "curate", "recipe": recipe.value, "train": train,
            "lexicon": lexicon, "heldout": list(heldout), "out": out}
    if _dry_run(ctx, plan):
        return

    train_split = corpus.read_split(_input_path(train, "train")) if train else None
    lexicon_split = corpus.read_split(_input_path(lexicon, "lexicon")) if lexicon else None
    heldout_splits = [corpus.read_split(_input_path(p, "heldout")) for p in heldout]

    index = curation.build_contamination_index(heldout_splits)
    removed: dict[str, int] = {}
    filtered = []
    for split in (train_split, lexicon_split):
        if split is None:
            filtered.append(None)
            continue
        clean, report = curation.contamination_filter(split, index)
        for word, count in report.removed.items():
            removed[word] = removed.get(word, 0) + count
        filtered.append(clean)
    assembled = curation.assemble_training_set(filtered[0], filtered[1], recipe)

    if filter_usages:
        guards = (curation.load_guard_file(guards_path) if guards_path
                  else curation.default_guards(assembled.language.code))
        matcher = curation.make_lemma_matcher(stem_min)
        assembled = corpus.DatasetSplit(
            name=assembled.name,
            language=assembled.language,
            records=[
                curation.filter_usage_sentences(rec, matcher, guards=guards)
                for rec in assembled.records
            ],
        )

    corpus.write_split(assembled, out)
    if report_path:
        curation.RemovalReport(removed=removed).write_json(report_path)
    _print_json({"written": out, "records": len(assembled.records),
                 "blocked_words_hit": len(removed),
                 "records_removed": sum(removed.values())})


@cli.command("export-finetune")
@click.option("--split", "split_path", default=None, help="Canonical split TSV.")
@click.option("--out", default=None, help="JSON-lines fine-tuning file.")
@click.option("--template", default=None,
              help="Prompt template with the <target> placeholder (default: stock).")
@click.option("--joiner", default=" ", show_default="single space")
@click.pass_context
def export_finetune(ctx, split_path, out, template, joiner):
    """Export usage+prompt / gold-definition pairs for an external trainer."""
    split_path = _resolve(ctx, "split_path", split_path, required=True)
    out = _resolve(ctx, "out", out, required=True)
    template = _resolve(ctx, "template", template)
    joiner = _resolve(ctx, "joiner", joiner)
    plan = {"command": "export-finetune", "split": split_path, "out": out}
    if _dry_run(ctx, plan):
        return
    split = corpus.read_split(_input_path(split_path, "split"))
    if template:
        prompt = prompting.PromptTemplate(split.language, template, joiner)
    else:
        prompt = prompting.default_prompt(split.language, joiner)
    counts = prompting.export_finetune_dataset(split, prompt, out)
    _print_json({"written": counts.written, "skipped": counts.skipped, "out": out})


@cli.command("export-config")
@click.option("--out", default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--weight-decay", type=float, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--warmup-ratio", type=float, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--optimizer", default=None)
@click.option("--lora-rank", type=int, default=None)
@click.option("--lora-alpha", type=int, default=None)
@click.option("--lora-dropout", type=float, default=None)
@click.pass_context
def export_config(ctx, out, **overrides):
    """Write the external-trainer configuration JSON."""
    out = _resolve(ctx, "out", out, required=True)
    merged = {
        key: _resolve(ctx, key, value)
        for key, value in overrides.items()
    }
    merged = {key: value for key, value in merged.items() if value is not None}
    plan = {"command": "export-config", "out": out, "overrides": merged}
    if _dry_run(ctx, plan):
        return
    try:
        config = prompting.export_trainer_config(merged, out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _print_json({"out": out, "config": {"lora_rank": config.lora_rank,
                                        "epochs": config.epochs}})


def _generation_options(fn):
    options = [
        click.option("--num-beams", type=int, default=5, show_default=True),
        click.option("--do-sample/--no-sample", default=False, show_default=True),
        click.option("--length-penalty", type=float, default=1.1, show_default=True),
        click.option("--early-stopping/--no-early-stopping", default=True,
                     show_default=True),
        click.option("--repetition-penalty", type=float, default=1.1, show_default=True),
        click.option("--max-new-tokens", type=int, default=64, show_default=True),
        click.option("--strategy",
                     type=click.Choice([s.value for s in inference.DecodingStrategy]),
                     default="beam", show_default=True),
        click.option("--seed", type=int, default=None,
                     help="Decoding seed for sampling strategies."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _endpoint_options(prefix: str):
    def apply(fn):
        options = [
            click.option(f"--{prefix}url", f"{prefix.replace('-', '_')}url",
                         default=None, help="Endpoint base URL."),
            click.option(f"--{prefix}model", f"{prefix.replace('-', '_')}model",
                         default=None, help="Model name sent to the endpoint."),
            click.option("--timeout", type=float, default=60.0, show_default=True),
            click.option("--max-retries", type=int, default=3, show_default=True),
            click.option("--max-in-flight", type=int, default=4, show_default=True),
        ]
        for option in reversed(options):
            fn = option(fn)
        return fn

    return apply


@cli.command()
@click.option("--split", "split_path", default=None, help="Canonical split TSV.")
@click.option("--out", default=None, help="Generations TSV to write.")
@click.option("--cache", "cache_path", default=None, help="Response cache JSONL.")
@click.option("--template", default=None)
@click.option("--joiner", default=" ")
@click.option("--novel-only/--all-records", default=True, show_default=True,
              help="Generate only for novel-sense records.")
@_endpoint_options("")
@_generation_options
@click.pass_context
def generate(ctx, split_path, out, cache_path, template, joiner, novel_only,
             url, model, timeout, max_retries, max_in_flight,
             num_beams, do_sample, length_penalty, early_stopping,
             repetition_penalty, max_new_tokens, strategy, seed):
    """Generate one definition per usage via the configured endpoint."""
    split_path = _resolve(ctx, "split_path", split_path, required=True)
    out = _resolve(ctx, "out", out, required=True)
    url = _resolve(ctx, "url", url, required=True)
    model = _resolve(ctx, "model", model, required=True)
    cache_path = _resolve(ctx, "cache_path", cache_path)
    plan = {"command": "generate", "split": split_path, "out": out, "endpoint": url,
            "model": model, "strategy": strategy}
    if _dry_run(ctx, plan):
        return

    split = corpus.read_split(_input_path(split_path, "split"))
    records = [r for r in split.records if r.is_novel_sense] if novel_only else list(split.records)
    if not records:
        raise EmptyInput("no records selected; pass --all-records to use every row")
    if template:
        prompt_template = prompting.PromptTemplate(split.language, template, joiner)
    else:
        prompt_template = prompting.default_prompt(split.language, joiner)
    prompts = [prompting.build_prompt(rec, prompt_template) for rec in records]

    gen = inference.GenerationConfig(
        num_beams=num_beams, do_sample=do_sample, length_penalty=length_penalty,
        early_stopping=early_stopping, repetition_penalty=repetition_penalty,
        max_new_tokens=max_new_tokens, strategy=inference.DecodingStrategy(strategy),
        seed=seed,
    )
    client = inference.GenerationClient(
        _endpoint(url, model, timeout, max_retries, max_in_flight),
        inference.ResponseCache(cache_path),
    )
    texts = client.generate(prompts, gen)

    usage_counter: dict[tuple[str, str], int] = {}
    generation_records = []
    for rec, text in zip(records, texts):
        key = (rec.word, rec.sense_id)
        idx = usage_counter.get(key, 0)
        usage_counter[key] = idx + 1
        generation_records.append(
            aggregation.GenerationRecord(rec.word, rec.sense_id, idx, text)
        )
    aggregation.write_generations(generation_records, out)
    _print_json({"out": out, "generated": sum(1 for t in texts if t is not None),
                 "failed": sum(1 for t in texts if t is None),
                 "requests": client.stats.requests, "cache_hits": client.stats.cache_hits})


@cli.command()
@click.option("--generations", "generations_path", default=None)
@click.option("--out", default=None, help="Predictions TSV to write.")
@click.option("--cache", "cache_path", default=None)
@click.option("--ordering", type=click.Choice([o.value for o in aggregation.Ordering]),
              default="prototype_similarity", show_default=True)
@_endpoint_options("")
@click.pass_context
def aggregate(ctx, generations_path, out, cache_path, ordering,
              url, model, timeout, max_retries, max_in_flight):
    """Collapse per-usage generations into one unique label per sense."""
    generations_path = _resolve(ctx, "generations_path", generations_path, required=True)
    out = _resolve(ctx, "out", out, required=True)
    url = _resolve(ctx, "url", url, required=True)
    model = _resolve(ctx, "model", model, required=True)
    cache_path = _resolve(ctx, "cache_path", cache_path)
    ordering = aggregation.Ordering(_resolve(ctx, "ordering", ordering))
    plan = {"command": "aggregate", "generations": generations_path, "out": out,
            "endpoint": url, "ordering": ordering.value}
    if _dry_run(ctx, plan):
        return

    records = aggregation.read_generations(_input_path(generations_path, "generations"))
    client = inference.EmbeddingClient(
        _endpoint(url, model, timeout, max_retries, max_in_flight),
        inference.ResponseCache(cache_path),
    )
    assignments = aggregation.aggregate_generations(records, client.embed_texts, ordering)
    aggregation.write_predictions([a.triplet for a in assignments], out)
    _print_json({"out": out, "senses": len(assignments),
                 "fallbacks": sum(1 for a in assignments if a.fallback)})


@cli.command()
@click.option("--pred", "pred_path", default=None, help="Predictions TSV.")
@click.option("--gold", "gold_path", default=None, help="Canonical gold split TSV.")
@click.option("--out", default=None, help="Report file.")
@click.option("--format", "report_format",
              type=click.Choice(["json", "tsv", "markdown_table"]),
              default="json", show_default=True)
@click.option("--stem-min", type=int, default=4, show_default=True)
@click.option("--cache", "cache_path", default=None)
@_endpoint_options("emb-")
@click.pass_context
def score(ctx, pred_path, gold_path, out, report_format, stem_min, cache_path,
          emb_url, emb_model, timeout, max_retries, max_in_flight):
    """Score predictions against gold novel senses (BLEU + BERTScore)."""
    pred_path = _resolve(ctx, "pred_path", pred_path, required=True)
    gold_path = _resolve(ctx, "gold_path", gold_path, required=True)
    out = _resolve(ctx, "out", out, required=True)
    emb_url = _resolve(ctx, "emb_url", emb_url)
    emb_model = _resolve(ctx, "emb_model", emb_model)
    plan = {"command": "score", "pred": pred_path, "gold": gold_path, "out": out,
            "format": report_format, "token_embedder": emb_url or "hash (offline)"}
    if _dry_run(ctx, plan):
        return

    predictions = aggregation.read_predictions(_input_path(pred_path, "pred"))
    gold_split = corpus.read_split(_input_path(gold_path, "gold"))
    gold = harness.load_gold(gold_split)
    embedder = None
    if emb_url:
        if not emb_model:
            raise ConfigError("--emb-model is required with --emb-url", key="emb_model")
        embedder = inference.EmbeddingClient(
            _endpoint(emb_url, emb_model, timeout, max_retries, max_in_flight),
            inference.ResponseCache(cache_path),
        )
    report = harness.score_predictions(predictions, gold, embedder, stem_min)
    harness.emit_report(report, out, report_format)
    _print_json({"out": out, "aggregates": report.aggregates,
                 "coverage": report.coverage})


@cli.command()
@click.option("--report-a", "report_a_path", default=None)
@click.option("--report-b", "report_b_path", default=None)
@click.option("--metric", type=click.Choice(list(harness.METRIC_NAMES)),
              default="bertscore_f1", show_default=True)
@click.option("--out", default=None, help="Optional JSON output path.")
@click.pass_context
def compare(ctx, report_a_path, report_b_path, metric, out):
    """Welch's t-test between two score reports' per-item metric values."""
    report_a_path = _resolve(ctx, "report_a_path", report_a_path, required=True)
    report_b_path = _resolve(ctx, "report_b_path", report_b_path, required=True)
    metric = _resolve(ctx, "metric", metric)
    plan = {"command": "compare", "report_a": report_a_path,
            "report_b": report_b_path, "metric": metric}
    if _dry_run(ctx, plan):
        return
    report_a = harness.read_report(_input_path(report_a_path, "report_a"))
    report_b = harness.read_report(_input_path(report_b_path, "report_b"))
    result = harness.compare_systems(report_a, report_b, metric)
    payload = {"metric": metric, "t_statistic": result.t_statistic,
               "degrees_of_freedom": result.degrees_of_freedom,
               "p_value": result.p_value}
    if out:
        Path(out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _print_json(payload)


@cli.command()
@click.option("--pred", "pred_path", default=None)
@click.option("--gold", "gold_path", default=None)
@click.option("--labels", "labels_path", default=None,
              help="Annotation label export (JSON-lines).")
@click.option("--stem-min", type=int, default=4, show_default=True)
@click.option("--out", default=None)
@click.pass_context
def analyze(ctx, pred_path, gold_path, labels_path, stem_min, out):
    """Error analysis: circularity, lengths, and human-label shares."""
    pred_path = _resolve(ctx, "pred_path", pred_path, required=True)
    gold_path = _resolve(ctx, "gold_path", gold_path, required=True)
    labels_path = _resolve(ctx, "labels_path", labels_path)
    plan = {"command": "analyze", "pred": pred_path, "gold": gold_path,
            "labels": labels_path}
    if _dry_run(ctx, plan):
        return
    predictions = aggregation.read_predictions(_input_path(pred_path, "pred"))
    gold = harness.load_gold(corpus.read_split(_input_path(gold_path, "gold")))
    labels = harness.load_label_file(_input_path(labels_path, "labels")) if labels_path else None
    report = harness.error_report(predictions, gold, stem_min, labels)
    payload = report.as_dict()
    if out:
        Path(out).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    _print_json(payload)


@cli.group()
def annotate():
    """Human annotation workflow."""


@annotate.command()
@click.option("--pred", "pred_path", default=None)
@click.option("--gold", "gold_path", default=None)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--sample-n", type=int, default=0, show_default=True,
              help="Sample size; 0 annotates the entire prediction set.")
@click.option("--seed", type=int, default=13, show_default=True)
@click.option("--model-tag", default="system", show_default=True)
@click.option("--store", "store_path", default=None, help="Label store JSONL.")
@click.option("--stem-min", type=int, default=4, show_default=True)
@click.pass_context
def serve(ctx, pred_path, gold_path, port, sample_n, seed, model_tag, store_path,
          stem_min):
    """Serve annotation tasks over REST until interrupted."""
    pred_path = _resolve(ctx, "pred_path", pred_path, required=True)
    gold_path = _resolve(ctx, "gold_path", gold_path, required=True)
    port = _resolve(ctx, "port", port)
    sample_n = _resolve(ctx, "sample_n", sample_n)
    seed = _resolve(ctx, "seed", seed)
    model_tag = _resolve(ctx, "model_tag", model_tag)
    store_path = _resolve(ctx, "store_path", store_path)
    plan = {"command": "annotate serve", "pred": pred_path, "gold": gold_path,
            "port": port, "sample_n": sample_n, "seed": seed}
    if _dry_run(ctx, plan):
        return

    predictions = aggregation.read_predictions(_input_path(pred_path, "pred"))
    gold_split = corpus.read_split(_input_path(gold_path, "gold"))
    gold = harness.load_gold(gold_split)
    usages: dict[tuple[str, str], str] = {}
    for rec in gold_split.records:
        usages.setdefault((rec.word, rec.sense_id), rec.usage)
    tasks = annotation.sample_tasks(predictions, gold, sample_n, seed, model_tag, usages)
    session = annotation.AnnotationSession(
        tasks=tasks, store=annotation.LabelStore(store_path), stem_min=stem_min
    )
    annotation.serve(session, port)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="defgen")
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc), "key": exc.key}),
              file=sys.stderr)
        return 1
    except UserError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2


if __name__ == "__main__":
    sys.exit(main())
