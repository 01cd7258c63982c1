from __future__ import annotations

import math
import random

import pytest

from fablegen.corpus import NarrativeElement, QAPair
from fablegen.errors import RankerError
from fablegen.ranker import (
    FallbackRanker,
    RankedQAPair,
    RankerHyperparams,
    RankerInputLayout,
    RankingExample,
    build_ranking_dataset,
    load_ranker,
    save_ranker,
    score,
    select_top_n,
    train_ranker,
)

from oracles import independent_top_n

LAYOUT = RankerInputLayout()
ANSWER_ONLY = RankerInputLayout(order="section_answer")


def _pair(q, a, score_=0.5, hint=0, section=1):
    return RankedQAPair(
        question=q, answer=a, score=score_, section_index=section, rank_hint=hint
    )


def _sentinel_examples(n_sections=30, sentinel_in="question"):
    """Linearly separable synthetic set: positives carry a sentinel token."""
    rng = random.Random(5)
    words = ["river", "stone", "wolf", "bread", "lantern", "meadow", "cloak", "ember"]
    examples = []
    for s in range(n_sections):
        section = f"section {s} tells of the {words[s % len(words)]} and the {words[(s + 3) % len(words)]}"
        for _ in range(2):
            q = " ".join(rng.choices(words, k=4)) + "?"
            a = " ".join(rng.choices(words, k=3))
            if sentinel_in == "question":
                pos_q, pos_a = q + " veritas", a
            else:
                pos_q, pos_a = q, a + " veritas"
            examples.append(RankingExample(section, pos_q, pos_a, 1))
            examples.append(
                RankingExample(section, " ".join(rng.choices(words, k=4)) + "?",
                               " ".join(rng.choices(words, k=3)), 0)
            )
    return examples


class TestLayout:
    def test_validation(self):
        with pytest.raises(ValueError):
            RankerInputLayout(order="answer_first")
        with pytest.raises(ValueError):
            RankerInputLayout(separator="")

    def test_serialization_orders(self):
        assert LAYOUT.serialize("sec", "q?", "a") == "sec [sep] q? [sep] a"
        assert ANSWER_ONLY.serialize("sec", "q?", "a") == "sec [sep] a"

    def test_example_validation(self):
        with pytest.raises(ValueError):
            RankingExample("", "q", "a", 1)
        with pytest.raises(ValueError):
            RankingExample("s", "q", "a", 2)


class TestBuildRankingDataset:
    def test_counting(self, corpus):
        gold = list(corpus.pairs_in_split("train"))[:3]
        generated = [
            RankedQAPair(
                question=f"generated {i}?", answer=f"answer {i}", score=0.5,
                section_index=1, rank_hint=i, story_id="the-junket-tale",
            )
            for i in range(5)
        ]
        examples = build_ranking_dataset(corpus, gold, generated)
        assert len(examples) == 8
        assert sum(e.label for e in examples) == 3

    def test_empty_gold_errors(self, corpus):
        with pytest.raises(RankerError):
            build_ranking_dataset(corpus, [], [])

    def test_shuffle_is_seeded(self, corpus):
        gold = list(corpus.pairs_in_split("train"))
        a = build_ranking_dataset(corpus, gold, [])
        b = build_ranking_dataset(corpus, gold, [])
        assert a == b
        c = build_ranking_dataset(corpus, gold, [], seed=99)
        assert {(e.question, e.label) for e in a} == {(e.question, e.label) for e in c}

    def test_unknown_section_reference(self, corpus):
        bad = QAPair(
            pair_id="x",
            story_id="no-such-book",
            section_indices=(1,),
            question="q?",
            answer="a",
            element=NarrativeElement.ACTION,
        )
        with pytest.raises(RankerError):
            build_ranking_dataset(corpus, [bad], [])

    def test_full_split_positive_count(self, corpus, fixture_manifest):
        gold = list(corpus.pairs_in_split("train"))
        examples = build_ranking_dataset(corpus, gold, [])
        assert sum(e.label for e in examples) == fixture_manifest["splits"]["train"]["qa_count"]


class TestTrainRanker:
    def test_sentinel_separable_f1(self):
        ranker, metrics = train_ranker(_sentinel_examples(), LAYOUT)
        assert metrics["f1"] >= 0.95
        assert metrics["held_out"] == 1.0

    def test_single_class_errors(self):
        examples = [RankingExample("s", f"q {i}?", "a", 1) for i in range(4)]
        with pytest.raises(RankerError, match="single class"):
            train_ranker(examples, LAYOUT)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            train_ranker([], LAYOUT)

    def test_question_layout_beats_answer_only_when_sentinel_in_question(self):
        examples = _sentinel_examples(sentinel_in="question")
        _, with_question = train_ranker(examples, LAYOUT)
        _, answer_only = train_ranker(examples, ANSWER_ONLY)
        assert with_question["f1"] > answer_only["f1"]

    def test_holdout_is_by_section(self):
        examples = _sentinel_examples(n_sections=10)
        _, metrics = train_ranker(examples, LAYOUT)
        assert metrics["holdout_examples"] >= 1
        # every held-out example's section stays out of training by construction;
        # the split helper groups by section text, so a section can never straddle.
        from fablegen.ranker import _holdout_split

        train_idx, holdout_idx = _holdout_split(examples, 0.10)
        train_sections = {examples[i].section_text for i in train_idx}
        holdout_sections = {examples[i].section_text for i in holdout_idx}
        assert not (train_sections & holdout_sections)


class TestScore:
    def test_fallback_formula_hand_computed(self):
        # qa tokens: [the, cat] -> counts {the:1, cat:1}
        # section tokens: [the, cat, sat, on, the, mat] -> {the:2, cat:1, sat:1, on:1, mat:1}
        # dot = 1*2 + 1*1 = 3; |qa| = sqrt(2); |sec| = sqrt(4+1+1+1+1) = sqrt(8)
        expected = 3 / (math.sqrt(2) * math.sqrt(8))
        got = score("the cat sat on the mat", "The?", "cat", FallbackRanker())
        assert got == pytest.approx(expected)

    def test_fallback_gold_like_beats_shuffled_noise(self, corpus):
        section = corpus.story("the-junket-tale").section(1)
        ranker = FallbackRanker()
        gold_like = score(section.text, "What did the three young men ask for?", "a junket", ranker)
        noise = score(section.text, "mother junket the a?", "sighed only if", ranker)
        # Both draw tokens from the section, but the gold-like pair matches
        # the section's token distribution better.
        assert 0.0 <= noise <= 1.0
        assert gold_like > 0.0

    def test_trailing_whitespace_invariance(self):
        ranker = FallbackRanker()
        a = score("the cat sat", "where is the cat?", "the cat", ranker)
        b = score("the cat sat  ", "where is the cat?  ", "the cat \n", ranker)
        assert a == b

    def test_deterministic(self):
        examples = _sentinel_examples()
        ranker, _ = train_ranker(examples, LAYOUT)
        first = score("section 1", "a question veritas?", "an answer", ranker, LAYOUT)
        second = score("section 1", "a question veritas?", "an answer", ranker, LAYOUT)
        assert first == second
        assert 0.0 <= first <= 1.0

    def test_layout_mismatch_errors(self):
        ranker, _ = train_ranker(_sentinel_examples(), LAYOUT)
        with pytest.raises(RankerError, match="layout mismatch"):
            score("s", "q?", "a", ranker, ANSWER_ONLY)

    def test_learned_scores_within_unit_interval(self):
        ranker, _ = train_ranker(_sentinel_examples(), LAYOUT)
        for q in ("veritas?", "plain question?"):
            value = score("section 0 tells of the river and the bread", q, "answer", ranker, LAYOUT)
            assert 0.0 <= value <= 1.0


class TestSelectTopN:
    def test_tie_break_by_rank_hint(self):
        pairs = [
            _pair("q late?", "a", 0.9, hint=5),
            _pair("q early?", "a", 0.9, hint=2),
            _pair("q low?", "a", 0.1, hint=1),
        ]
        (winner,) = select_top_n(pairs, 1)
        assert winner.rank_hint == 2

    def test_n_larger_than_input_returns_all_sorted(self):
        pairs = [_pair(f"q{i}?", "a", s) for i, s in enumerate((0.2, 0.9, 0.5))]
        result = select_top_n(pairs, 10)
        assert [p.score for p in result] == [0.9, 0.5, 0.2]

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            select_top_n([], 0)

    def test_dedup_keeps_best_variant(self):
        pairs = [
            _pair("q?", "a", 0.3, hint=1),
            _pair("q?", "a", 0.8, hint=9),
            _pair("other?", "b", 0.5, hint=0),
        ]
        result = select_top_n(pairs, 5)
        assert len(result) == 2
        assert result[0].score == 0.8

    def test_prefix_property(self):
        rng = random.Random(17)
        pairs = [
            _pair(f"q{i}?", f"a{i % 7}", round(rng.random(), 3), hint=rng.randint(0, 20))
            for i in range(40)
        ]
        for n1 in (1, 3, 7, 15):
            for n2 in range(n1, 20, 4):
                assert select_top_n(pairs, n1) == select_top_n(pairs, n2)[:n1]

    def test_matches_independent_selection_oracle_on_random_sets(self):
        rng = random.Random(23)
        for case in range(100):
            pairs = [
                _pair(
                    f"q{rng.randint(0, 30)}?",
                    f"a{rng.randint(0, 5)}",
                    round(rng.random(), 2),
                    hint=rng.randint(0, 9),
                )
                for _ in range(rng.randint(1, 25))
            ]
            n = rng.randint(1, 12)
            assert select_top_n(pairs, n) == independent_top_n(pairs, n), f"case {case}"


class TestPersistence:
    def test_learned_round_trip(self, tmp_path):
        ranker, _ = train_ranker(_sentinel_examples(), LAYOUT)
        save_ranker(ranker, tmp_path / "ranker")
        loaded = load_ranker(tmp_path / "ranker")
        for q in ("question veritas?", "another question?"):
            assert score("section 2", q, "answer", loaded, LAYOUT) == pytest.approx(
                score("section 2", q, "answer", ranker, LAYOUT)
            )
        assert loaded.layout == LAYOUT

    def test_fallback_round_trip(self, tmp_path):
        save_ranker(FallbackRanker(), tmp_path / "fb")
        loaded = load_ranker(tmp_path / "fb")
        assert isinstance(loaded, FallbackRanker)


class TestRankedQAPairModel:
    def test_score_bounds(self):
        with pytest.raises(ValueError):
            _pair("q?", "a", 1.5)

    def test_roundtrip(self):
        pair = RankedQAPair(
            question="q?", answer="a", score=0.25, section_index=2, rank_hint=3,
            story_id="b", system_tag="sys",
        )
        assert RankedQAPair.from_dict(pair.to_dict()) == pair
