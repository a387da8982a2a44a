import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defgen.aggregation import (
    DefinitionCandidate,
    GenerationRecord,
    Ordering,
    SenseGroup,
    Triplet,
    aggregate_generations,
    assign_sense_labels,
    build_sense_groups,
    cosine,
    mean_embedding,
    rank_candidates,
    read_generations,
    read_predictions,
    write_generations,
    write_predictions,
)
from defgen.errors import DimensionMismatch, EmptyGroup, EmptyInput, ZeroVector
from defgen.inference import EmbeddingVector

from oracles import assignment_oracle


def ev(*values: float) -> EmbeddingVector:
    return EmbeddingVector(values=tuple(float(v) for v in values))


def group(word, sense_id, cands, usage_count=None):
    candidates = tuple(
        DefinitionCandidate(text=t, embedding=e, frequency=f) for t, e, f in cands
    )
    return SenseGroup(
        word=word,
        sense_id=sense_id,
        candidates=candidates,
        usage_count=usage_count or sum(f for _, _, f in cands),
    )


class TestMeanEmbedding:
    def test_two_basis_vectors(self):
        assert mean_embedding([ev(1, 0), ev(0, 1)]).values == (0.5, 0.5)

    def test_single_vector_identity(self):
        assert mean_embedding([ev(0.3, 0.7)]).values == (0.3, 0.7)

    def test_three_vector_hand_sum(self):
        result = mean_embedding([ev(1, 0), ev(0.9, 0.1), ev(0, 1)])
        assert result.values[0] == pytest.approx(1.9 / 3)
        assert result.values[1] == pytest.approx(1.1 / 3)

    def test_errors(self):
        with pytest.raises(EmptyInput):
            mean_embedding([])
        with pytest.raises(DimensionMismatch):
            mean_embedding([ev(1, 0), ev(1, 0, 0)])


class TestCosine:
    def test_identical(self):
        assert cosine(ev(1, 0), ev(1, 0)) == 1.0
        assert cosine(ev(0.2, 0.4, 0.9), ev(0.2, 0.4, 0.9)) == 1.0

    def test_orthogonal(self):
        assert cosine(ev(1, 0), ev(0, 1)) == 0.0

    def test_hand_computed(self):
        assert cosine(ev(0.9, 0.1), ev(0.6333, 0.3667)) == pytest.approx(
            0.9155, abs=2e-4
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            cosine(ev(0, 0), ev(1, 0))

    @given(
        scale=st.floats(0.01, 100.0),
        x=st.floats(-1, 1).filter(lambda v: abs(v) > 0.01),
        y=st.floats(-1, 1).filter(lambda v: abs(v) > 0.01),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_invariant(self, scale, x, y):
        a, b = ev(x, y), ev(y, -x + 0.3)
        assert cosine(ev(x * scale, y * scale), b) == pytest.approx(cosine(a, b))


class TestRankCandidates:
    def test_three_candidate_fixture(self):
        g = group("w", "s1", [("alpha", ev(1, 0), 1), ("beta", ev(0.9, 0.1), 1),
                             ("gamma", ev(0, 1), 1)])
        ranked = rank_candidates(g)
        assert [c.text for c in ranked.candidates] == ["beta", "alpha", "gamma"]
        sims = [c.similarity_to_prototype for c in ranked.candidates]
        assert sims[0] == pytest.approx(0.9155, abs=1e-4)
        assert sims[1] == pytest.approx(0.8654, abs=1e-4)
        assert sims[2] == pytest.approx(0.5011, abs=1e-4)

    def test_single_candidate_self_similarity(self):
        ranked = rank_candidates(group("w", "s", [("only", ev(0.4, 0.6), 3)]))
        assert ranked.candidates[0].similarity_to_prototype == 1.0

    def test_tie_broken_by_frequency_then_text(self):
        g = group(
            "w", "s",
            [("bbb", ev(1, 0), 1), ("aaa", ev(1, 0), 1), ("ccc", ev(1, 0), 2)],
        )
        ranked = rank_candidates(g)
        assert [c.text for c in ranked.candidates] == ["ccc", "aaa", "bbb"]

    def test_frequency_weighted_prototype(self):
        # freq 3 on (1,0) pulls the prototype toward it
        g = group("w", "s", [("x", ev(1, 0), 3), ("y", ev(0, 1), 1)])
        ranked = rank_candidates(g)
        assert ranked.candidates[0].text == "x"

    def test_zero_embedding_ranked_last_with_sentinel(self, caplog):
        g = group("w", "s", [("ok", ev(1, 0), 1), ("zero", ev(0, 0), 5)])
        with caplog.at_level("WARNING"):
            ranked = rank_candidates(g)
        assert ranked.candidates[-1].text == "zero"
        assert ranked.candidates[-1].similarity_to_prototype == -math.inf

    def test_empty_group_rejected(self):
        with pytest.raises(EmptyGroup):
            rank_candidates(SenseGroup("w", "s", (), 1))


class TestAssignSenseLabels:
    def test_disjoint_top_candidates(self):
        groups = [
            group("w", "s1", [("label one", ev(1, 0), 2)]),
            group("w", "s2", [("label two", ev(0, 1), 2)]),
        ]
        out = assign_sense_labels(groups)
        assert {a.sense_id: a.label for a in out} == {
            "s1": "label one", "s2": "label two",
        }
        assert all(not a.fallback for a in out)
        assert all(a.rank_used == 0 for a in out)

    def test_conflicting_top_candidate_loser_takes_rank_one(self):
        shared = "the shared definition"
        groups = [
            group(
                "w", "s_big",
                [(shared, ev(1, 0), 3), ("big alt", ev(0.8, 0.2), 1)],
            ),
            group(
                "w", "s_small",
                [(shared, ev(1, 0), 1), ("small alt", ev(0.7, 0.3), 1)],
            ),
        ]
        out = {a.sense_id: a for a in assign_sense_labels(groups)}
        assert out["s_big"].label == shared
        assert out["s_big"].rank_used == 0
        assert out["s_small"].label == "small alt"
        assert out["s_small"].rank_used == 1
        assert not out["s_small"].fallback
        assert out["s_big"].label != out["s_small"].label

    def test_exhaustion_sets_fallback(self):
        only = "the only definition"
        groups = [
            group("w", "s1", [(only, ev(1, 0), 2)]),
            group("w", "s2", [(only, ev(1, 0), 1)]),
        ]
        out = {a.sense_id: a for a in assign_sense_labels(groups)}
        assert out["s1"].fallback is False
        assert out["s2"].fallback is True
        assert out["s1"].label == out["s2"].label == only

    def test_duplicate_labels_only_with_fallback(self):
        rng = random.Random(0)
        for _ in range(30):
            groups = _random_word_groups(rng)
            out = assign_sense_labels(groups)
            seen = {}
            for a in out:
                if a.label in seen:
                    assert a.fallback
                seen[a.label] = a

    def test_singleton_group(self):
        out = assign_sense_labels([group("w", "s", [("one", ev(0.5, 0.5), 1)])])
        assert out[0].label == "one"
        assert out[0].rank_used == 0
        assert not out[0].fallback

    def test_frequency_ordering_prefers_frequent_text(self):
        groups = [
            group(
                "w", "s",
                [("frequent", ev(0, 1), 5), ("prototypical", ev(1, 0.02), 1)],
                usage_count=6,
            ),
        ]
        by_similarity = assign_sense_labels(groups, Ordering.PROTOTYPE_SIMILARITY)
        by_frequency = assign_sense_labels(groups, Ordering.FREQUENCY)
        assert by_frequency[0].label == "frequent"
        assert by_similarity[0].label == "frequent"  # freq 5 dominates the prototype

    def test_mixed_words_rejected(self):
        with pytest.raises(ValueError):
            assign_sense_labels(
                [group("w1", "s", [("a", ev(1, 0), 1)]),
                 group("w2", "s", [("b", ev(1, 0), 1)])]
            )


def _random_word_groups(rng: random.Random, max_groups=4, max_cands=4):
    groups = []
    for gi in range(rng.randint(1, max_groups)):
        cands = []
        for ci in range(rng.randint(1, max_cands)):
            # small shared vocabulary to force label conflicts
            text = f"definition {rng.randint(0, 5)}"
            if any(t == text for t, _, _ in cands):
                continue
            vec = ev(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))
            cands.append((text, vec, rng.randint(1, 3)))
        if cands:
            groups.append(group("w", f"s{gi}", cands))
    return groups


class TestAgainstBruteForceOracle:
    @pytest.mark.parametrize("ordering", ["prototype_similarity", "frequency"])
    def test_matches_reference_reimplementation(self, ordering):
        rng = random.Random(42)
        for _ in range(60):
            groups = _random_word_groups(rng)
            got = assign_sense_labels(groups, Ordering(ordering))
            oracle_groups = [
                {
                    "sense_id": g.sense_id,
                    "usage_count": g.usage_count,
                    "candidates": [
                        (c.text, list(c.embedding.values), c.frequency)
                        for c in g.candidates
                    ],
                }
                for g in groups
            ]
            want = assignment_oracle(oracle_groups, ordering)
            assert [(a.sense_id, a.label, a.rank_used, a.fallback) for a in got] == want


class TestInvariance:
    def test_permutation_invariance(self):
        rng = random.Random(9)
        for _ in range(40):
            groups = _random_word_groups(rng)
            baseline = assign_sense_labels(groups)
            shuffled = []
            for g in groups:
                cands = list(g.candidates)
                rng.shuffle(cands)
                shuffled.append(
                    SenseGroup(g.word, g.sense_id, tuple(cands), g.usage_count)
                )
            rng.shuffle(shuffled)
            permuted = assign_sense_labels(shuffled)
            key = lambda out: sorted(
                (a.sense_id, a.label, a.rank_used, a.fallback) for a in out
            )
            assert key(permuted) == key(baseline)

    def test_global_scaling_invariance(self):
        rng = random.Random(17)
        for _ in range(40):
            groups = _random_word_groups(rng)
            scale = rng.uniform(0.05, 20.0)
            scaled = [
                SenseGroup(
                    g.word,
                    g.sense_id,
                    tuple(
                        DefinitionCandidate(
                            text=c.text,
                            embedding=ev(*(scale * v for v in c.embedding.values)),
                            frequency=c.frequency,
                        )
                        for c in g.candidates
                    ),
                    g.usage_count,
                )
                for g in groups
            ]
            baseline = [
                (a.sense_id, a.label, a.rank_used, a.fallback)
                for a in assign_sense_labels(groups)
            ]
            rescaled = [
                (a.sense_id, a.label, a.rank_used, a.fallback)
                for a in assign_sense_labels(scaled)
            ]
            assert rescaled == baseline


class TestGroupBuilding:
    def test_dedupe_with_frequencies(self):
        records = [
            GenerationRecord("w", "s", 0, "def a"),
            GenerationRecord("w", "s", 1, "def a"),
            GenerationRecord("w", "s", 2, "def b"),
        ]
        groups = build_sense_groups(records, {"def a": ev(1, 0), "def b": ev(0, 1)})
        assert len(groups) == 1
        assert {c.text: c.frequency for c in groups[0].candidates} == {
            "def a": 2, "def b": 1,
        }
        assert groups[0].usage_count == 3

    def test_missing_generations_dropped(self, caplog):
        records = [
            GenerationRecord("w", "s1", 0, None),
            GenerationRecord("w", "s1", 1, "def"),
            GenerationRecord("w", "s2", 0, None),
        ]
        with caplog.at_level("WARNING"):
            groups = build_sense_groups(records, {"def": ev(1, 0)})
        assert [g.sense_id for g in groups] == ["s1"]
        assert groups[0].usage_count == 1
        assert "skipping" in caplog.text


class TestAggregateGenerations:
    def test_end_to_end_unique_labels(self):
        records = [
            GenerationRecord("kone", "kone_1", 0, "laite"),
            GenerationRecord("kone", "kone_1", 1, "laite"),
            GenerationRecord("kone", "kone_2", 0, "laite"),
            GenerationRecord("kone", "kone_2", 1, "tietokone"),
            GenerationRecord("verkko", "verkko_1", 0, "pyydys"),
        ]
        table = {
            "laite": ev(1, 0, 0), "tietokone": ev(0.8, 0.6, 0), "pyydys": ev(0, 0, 1),
        }
        out = aggregate_generations(records, lambda texts: [table[t] for t in texts])
        labels = {(a.word, a.sense_id): a.label for a in out}
        assert labels[("kone", "kone_1")] == "laite"
        assert labels[("kone", "kone_2")] == "tietokone"
        assert labels[("verkko", "verkko_1")] == "pyydys"
        assert [a.word for a in out] == sorted(a.word for a in out)


class TestGenerationsIo:
    def test_round_trip(self, tmp_path):
        records = [
            GenerationRecord("w", "s", 0, "a definition"),
            GenerationRecord("w", "s", 1, None),
            GenerationRecord("v", "t", 0, "another"),
        ]
        path = tmp_path / "gen.tsv"
        write_generations(records, path)
        assert read_generations(path) == records

    def test_predictions_round_trip(self, tmp_path):
        triplets = [Triplet("w", "s", "the definition"), Triplet("v", "t", "another")]
        path = tmp_path / "pred.tsv"
        write_predictions(triplets, path)
        assert read_predictions(path) == triplets
