import json

import pytest

from defgen.aggregation import Triplet
from defgen.harness import (
    GoldItem,
    ScoreReport,
    compare_systems,
    emit_report,
    error_report,
    load_gold,
    read_report,
    score_predictions,
)
from defgen.inference import HashTokenEmbedder

from conftest import make_record, make_split


def gold_items(*pairs):
    return [GoldItem(word=w, sense_id=s, definition=d) for w, s, d in pairs]


class TestLoadGold:
    def test_multiple_usages_collapse_to_one_item(self):
        split = make_split(
            [
                make_record("a", "a_1", f"usage {i}", "the gold def", novel=True)
                for i in range(3)
            ]
        )
        items = load_gold(split)
        assert len(items) == 1
        assert items[0].definition == "the gold def"

    def test_no_novel_senses_warns_and_returns_empty(self, caplog):
        split = make_split([make_record("a", definition="d")])
        with caplog.at_level("WARNING"):
            assert load_gold(split) == []
        assert "no novel senses" in caplog.text

    def test_mixed_fixture(self):
        split = make_split(
            [
                make_record("a", "a_1", "u1", "d1", novel=True),
                make_record("a", "a_2", "u2", "d2", novel=True),
                make_record("b", "b_1", "u3", "d3", novel=False),
            ]
        )
        assert len(load_gold(split)) == 2

    def test_duplicates_keep_first_definition(self):
        split = make_split(
            [
                make_record("a", "a_1", "u1", "first", novel=True),
                make_record("a", "a_1", "u2", "second", novel=True),
            ]
        )
        assert load_gold(split)[0].definition == "first"


class TestScorePredictions:
    def test_echo_gold_scores_exactly_100(self):
        gold = gold_items(
            ("a", "a_1", "a unit of a living organism"),
            ("b", "b_1", "a piece of furniture"),
        )
        predictions = [Triplet(g.word, g.sense_id, g.definition) for g in gold]
        report = score_predictions(predictions, gold)
        assert report.aggregates["bleu"] == 100.0
        assert report.aggregates["bertscore_f1"] == 100.0
        assert report.aggregates["bertscore_precision"] == 100.0
        assert report.coverage == 1.0

    def test_missing_prediction_scores_zero_and_halves_coverage(self):
        gold = gold_items(("a", "a_1", "def one"), ("b", "b_1", "def two"))
        predictions = [Triplet("a", "a_1", "def one")]
        report = score_predictions(predictions, gold)
        assert report.coverage == 0.5
        missing = next(i for i in report.per_item if i.word == "b")
        assert missing.bleu == 0.0
        assert missing.bertscore_f1 == 0.0
        assert not missing.matched

    def test_aggregate_equals_mean_of_hand_computed_bleu(self):
        gold = gold_items(
            ("w1", "s", "the cat sat down"),
            ("w2", "s", "a b"),
            ("w3", "s", "same text"),
        )
        predictions = [
            Triplet("w1", "s", "the cat sat"),   # BLEU ~ 0.716531
            Triplet("w2", "s", "a a a"),          # BLEU ~ 0.118563
            Triplet("w3", "s", "same text"),      # BLEU = 1.0
        ]
        report = score_predictions(predictions, gold)
        expected = (0.7165313105737893 + 0.11856311014966876 + 1.0) / 3 * 100
        assert report.aggregates["bleu"] == pytest.approx(expected, abs=1e-9)

    def test_extra_predictions_warned_not_penalized(self, caplog):
        gold = gold_items(("a", "a_1", "def"))
        predictions = [Triplet("a", "a_1", "def"), Triplet("zz", "zz_1", "extra")]
        with caplog.at_level("WARNING"):
            report = score_predictions(predictions, gold)
        assert report.extra_predictions == 1
        assert report.aggregates["bleu"] == 100.0

    def test_aggregates_equal_bruteforce_recomputation(self):
        gold = gold_items(
            ("a", "a_1", "one two three"),
            ("b", "b_1", "four five"),
            ("c", "c_1", "six"),
        )
        predictions = [
            Triplet("a", "a_1", "one two"),
            Triplet("c", "c_1", "seven"),
        ]
        report = score_predictions(predictions, gold)
        for name in ("bleu", "bertscore_f1"):
            values = [item.metric(name) for item in report.per_item]
            assert report.aggregates[name] == pytest.approx(
                100 * sum(values) / len(values)
            )

    def test_removing_a_prediction_never_increases_aggregates(self):
        gold = gold_items(
            ("a", "a_1", "one two three"),
            ("b", "b_1", "four five six"),
        )
        predictions = [
            Triplet("a", "a_1", "one two three"),
            Triplet("b", "b_1", "four five"),
        ]
        embedder = HashTokenEmbedder()
        full = score_predictions(predictions, gold, embedder)
        for drop in range(len(predictions)):
            reduced = score_predictions(
                predictions[:drop] + predictions[drop + 1 :], gold, embedder
            )
            for name, value in reduced.aggregates.items():
                assert value <= full.aggregates[name] + 1e-12

    def test_circularity_and_length_fields(self):
        gold_text = "a flat piece of furniture"
        pred_text = "a table is a sort of a table"
        gold = gold_items(("table", "t_1", gold_text))
        predictions = [Triplet("table", "t_1", pred_text)]
        report = score_predictions(predictions, gold)
        assert report.circularity_rate == 100.0
        assert report.length_ratio == pytest.approx(len(pred_text) / len(gold_text))


class TestCompareSystems:
    def test_identical_reports(self):
        gold = gold_items(("a", "a_1", "x y z"), ("b", "b_1", "p q"),
                          ("c", "c_1", "m n"))
        predictions = [Triplet("a", "a_1", "x y"), Triplet("b", "b_1", "p"),
                       Triplet("c", "c_1", "m n")]
        report = score_predictions(predictions, gold)
        result = compare_systems(report, report, "bleu")
        assert result.t_statistic == 0.0
        assert result.p_value == 1.0

    def test_matches_ttest_fixture(self):
        def fake_report(values):
            from defgen.harness import ItemScore

            items = [
                ItemScore(f"w{i}", "s", v, v, v, v, matched=True)
                for i, v in enumerate(values)
            ]
            return ScoreReport(
                per_item=items,
                aggregates={},
                coverage=1.0,
                circularity_rate=None,
                length_ratio=None,
            )

        result = compare_systems(fake_report([1, 2, 3, 4]), fake_report([2, 3, 4, 5]),
                                 "bleu")
        assert result.t_statistic == pytest.approx(-1.095445, abs=1e-6)
        assert result.degrees_of_freedom == pytest.approx(6.0)

    def test_disjoint_key_sets_zero_filled(self, caplog):
        gold_a = gold_items(("a", "a_1", "x y"), ("a2", "s", "zz qq"))
        gold_b = gold_items(("b", "b_1", "p q"), ("b2", "s", "rr ww"))
        report_a = score_predictions([Triplet("a", "a_1", "x y"),
                                      Triplet("a2", "s", "zz")], gold_a)
        report_b = score_predictions([Triplet("b", "b_1", "p q"),
                                      Triplet("b2", "s", "rr")], gold_b)
        with caplog.at_level("WARNING"):
            result = compare_systems(report_a, report_b, "bleu")
        assert "different gold keys" in caplog.text
        assert result.p_value <= 1.0


class TestErrorReport:
    def test_all_circular(self):
        predictions = [
            Triplet("cat", "c_1", "a cat is a cat"),
            Triplet("dog", "d_1", "the dog barks"),
        ]
        report = error_report(predictions, [])
        assert report.circularity_rate == 100.0

    def test_five_of_thirtytwo_formats_one_decimal(self):
        predictions = [
            Triplet(f"w{i}", "s", f"w{i} appears here" if i < 5 else "clean text")
            for i in range(32)
        ]
        report = error_report(predictions, [])
        assert report.circular_count == 5
        assert report.as_dict()["circularity_rate_formatted"] == "15.6"

    def test_fluency_share_from_label_file(self):
        predictions = [Triplet(f"w{i}", "s", "text") for i in range(30)]
        labels = [
            {"task_id": f"t{i}", "fluency_issue": i < 2, "adequacy_issue": False}
            for i in range(30)
        ]
        report = error_report(predictions, [], labels=labels)
        assert report.fluency_share == pytest.approx(100 * 2 / 30)
        assert report.as_dict()["fluency_share_formatted"] == "6.67"

    def test_no_labels_reported_absent(self):
        report = error_report([Triplet("w", "s", "text")], [])
        assert report.fluency_share is None
        assert report.adequacy_share is None
        assert report.as_dict()["fluency_share_formatted"] is None

    def test_or_count_identity(self):
        from defgen.metrics import detect_circularity

        predictions = [
            Triplet("alpha", "s", "alpha rules"),
            Triplet("beta", "s", "gamma text"),
            Triplet("delta", "s", "deltas noted"),
        ]
        report = error_report(predictions, [])
        manual = sum(
            1 for p in predictions if detect_circularity(p.definition, p.word, 4)
        )
        assert report.circular_count == manual
        assert report.circularity_rate == pytest.approx(100 * manual / 3)


class TestEmitReport:
    @pytest.fixture
    def echo_report(self):
        gold = gold_items(("a", "a_1", "some gold def"), ("b", "b_1", "other def"))
        predictions = [Triplet(g.word, g.sense_id, g.definition) for g in gold]
        return score_predictions(predictions, gold)

    def test_markdown_row_shape(self, tmp_path, echo_report):
        path = tmp_path / "report.md"
        emit_report(echo_report, path, "markdown_table")
        assert "100.00 / 100.00 / 100.00 / 100.00" in path.read_text()

    def test_json_round_trip(self, tmp_path, echo_report):
        path = tmp_path / "report.json"
        emit_report(echo_report, path, "json")
        loaded = read_report(path)
        assert loaded.aggregates == echo_report.aggregates
        assert loaded.per_item == echo_report.per_item
        assert loaded.coverage == echo_report.coverage

    def test_tsv_row_per_sense_plus_footer(self, tmp_path, echo_report):
        path = tmp_path / "report.tsv"
        emit_report(echo_report, path, "tsv")
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + len(echo_report.per_item) + 2
        assert lines[-2].startswith("AGGREGATE")
        assert lines[-1].startswith("COVERAGE")

    def test_unknown_format_rejected(self, tmp_path, echo_report):
        with pytest.raises(ValueError):
            emit_report(echo_report, tmp_path / "x", "yaml")
