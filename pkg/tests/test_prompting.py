import json

import pytest

from defgen.corpus import Language
from defgen.errors import LanguageMismatch, UnsupportedLanguage
from defgen.prompting import (
    ALTERNATIVE_TEMPLATES,
    DECODER_ONLY_OVERRIDES,
    PromptTemplate,
    TrainerConfig,
    build_prompt,
    default_prompt,
    export_finetune_dataset,
    export_trainer_config,
)

from conftest import make_record, make_split


class TestDefaultPrompt:
    @pytest.mark.parametrize(
        ("code", "expected"),
        [
            ("ru", "Что такое <target>?"),
            ("fi", ". Mitä tarkoittaa <target>?"),
            ("de", ". Was ist die Definition von <target>?"),
        ],
    )
    def test_stock_templates_byte_for_byte(self, code, expected):
        template = default_prompt(Language(code))
        assert template.template == expected
        assert template.template.encode("utf-8") == expected.encode("utf-8")

    def test_unsupported_language(self):
        with pytest.raises(UnsupportedLanguage):
            default_prompt(Language("en"))

    def test_finnish_alternative_is_shipped_but_not_default(self):
        assert ALTERNATIVE_TEMPLATES["fi_what_is"] == "Mikä on <target>?"
        assert default_prompt(Language("fi")).template != ALTERNATIVE_TEMPLATES["fi_what_is"]

    def test_placeholder_must_appear_exactly_once(self):
        with pytest.raises(ValueError):
            PromptTemplate(Language("fi"), "no placeholder here")
        with pytest.raises(ValueError):
            PromptTemplate(Language("fi"), "<target> twice <target>")


class TestBuildPrompt:
    def test_usage_then_joiner_then_question(self):
        usage = (
            "In multicellular organisms, groups of cells form tissues and tissues "
            "come together to form organs"
        )
        record = make_record("cell", usage=usage, language="fi")
        template = PromptTemplate(Language("fi"), "What is the meaning of <target>?")
        assert build_prompt(record, template) == usage + " What is the meaning of cell?"

    def test_empty_joiner_concatenates_directly(self):
        record = make_record("kone", usage="Kone toimii.", language="fi")
        template = default_prompt(Language("fi"), joiner="")
        assert build_prompt(record, template) == "Kone toimii.. Mitä tarkoittaa kone?"

    def test_regex_metacharacters_substituted_literally(self):
        record = make_record("C++", usage="Wir lernen C++ seit Jahren.", language="de")
        template = PromptTemplate(Language("de"), "Was bedeutet <target>?")
        assert (
            build_prompt(record, template)
            == "Wir lernen C++ seit Jahren. Was bedeutet C++?"
        )

    def test_language_mismatch_rejected(self):
        record = make_record("kone", language="fi")
        with pytest.raises(LanguageMismatch):
            build_prompt(record, default_prompt(Language("de")))

    def test_output_contains_usage_prefix_and_word(self):
        record = make_record("verkko", usage="Verkko repesi heti.", language="fi")
        prompt = build_prompt(record, default_prompt(Language("fi")))
        assert prompt.startswith(record.usage)
        assert record.word in prompt


class TestExportFinetune:
    def test_three_records_with_definitions(self, tmp_path):
        records = [
            make_record("a", usage=f"usage {i} of a", definition=f"def {i}")
            for i in range(3)
        ]
        split = make_split(records)
        template = default_prompt(Language("fi"))
        path = tmp_path / "train.jsonl"
        counts = export_finetune_dataset(split, template, path)
        assert counts == (3, 0)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert [line["output"] for line in lines] == ["def 0", "def 1", "def 2"]
        assert lines[0]["input"] == build_prompt(records[0], template)

    def test_record_without_definition_skipped(self, tmp_path):
        split = make_split(
            [make_record("a", definition="yes"), make_record("b", definition=None)]
        )
        counts = export_finetune_dataset(
            split, default_prompt(Language("fi")), tmp_path / "out.jsonl"
        )
        assert counts.written == 1
        assert counts.skipped == 1

    def test_empty_split_writes_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        counts = export_finetune_dataset(
            make_split([]), default_prompt(Language("fi")), path
        )
        assert counts == (0, 0)
        assert path.read_text() == ""

    def test_line_count_plus_skips_equals_records(self, tmp_path):
        records = [
            make_record("w", usage=f"u{i}", definition="d" if i % 3 else None)
            for i in range(10)
        ]
        path = tmp_path / "out.jsonl"
        counts = export_finetune_dataset(
            make_split(records), default_prompt(Language("fi")), path
        )
        lines = path.read_text().splitlines()
        assert len(lines) == counts.written
        assert counts.written + counts.skipped == len(records)


class TestTrainerConfig:
    def test_defaults(self, tmp_path):
        path = tmp_path / "trainer.json"
        export_trainer_config(None, path)
        payload = json.loads(path.read_text())
        assert payload["lora_rank"] == 256
        assert payload["lora_alpha"] == 512
        assert payload["lora_dropout"] == 0.1
        assert payload["batch_size"] == 16
        assert payload["warmup_ratio"] == 0.05
        assert payload["epochs"] == 1
        assert payload["optimizer"] == "paged_adamw_8bit"
        assert payload["weight_decay"] == 0.0
        assert payload["learning_rate"] == 5e-5
        assert payload["notes"] == "QLoRA adapters applied to all linear layers"
        assert payload["alternatives"]["decoder_only"] == DECODER_ONLY_OVERRIDES

    def test_override_merges_with_defaults(self, tmp_path):
        path = tmp_path / "trainer.json"
        export_trainer_config({"learning_rate": 1e-4}, path)
        payload = json.loads(path.read_text())
        assert payload["learning_rate"] == 1e-4
        assert payload["lora_rank"] == 256

    def test_invalid_override_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_trainer_config({"lora_rank": -1}, tmp_path / "x.json")
        with pytest.raises(ValueError):
            TrainerConfig(warmup_ratio=1.5)
