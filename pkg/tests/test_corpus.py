from __future__ import annotations

import json

import pytest

from fablegen.corpus import (
    Corpus,
    NarrativeElement,
    Origin,
    QAPair,
    Section,
    Split,
    SplitStats,
    Story,
    category_distribution,
    compute_stats,
    load_corpus,
    save_corpus,
)
from fablegen.errors import CorpusFormatError, CorpusValidationError

from conftest import CSV_CORPUS


class TestNarrativeElement:
    def test_exactly_seven_members(self):
        assert len(NarrativeElement) == 7

    @pytest.mark.parametrize(
        "label,expected",
        [
            ("character", NarrativeElement.CHARACTER),
            ("causal relationship", NarrativeElement.CAUSAL_RELATIONSHIP),
            ("Outcome Resolution", NarrativeElement.OUTCOME_RESOLUTION),
            ("outcome_resolution", NarrativeElement.OUTCOME_RESOLUTION),
        ],
    )
    def test_parse_normalizes(self, label, expected):
        assert NarrativeElement.parse(label) is expected

    def test_unknown_label_is_an_error(self):
        with pytest.raises(ValueError, match="unknown narrative element"):
            NarrativeElement.parse("vibes")


class TestLoading:
    def test_fixture_counts_match_manifest(self, corpus, fixture_manifest):
        assert len(corpus.stories) == fixture_manifest["book_total"]
        assert len(corpus.pairs) == fixture_manifest["qa_total"]
        for split, expected in fixture_manifest["splits"].items():
            assert len(corpus.stories_in_split(split)) == expected["book_count"]
            assert len(corpus.pairs_in_split(split)) == expected["qa_count"]

    def test_empty_directory_is_a_validation_error(self, tmp_path):
        with pytest.raises(CorpusValidationError, match="no stories found"):
            load_corpus(tmp_path)

    def test_missing_root_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_corpus(tmp_path / "nope")

    def test_malformed_story_file_names_the_file(self, tmp_path):
        stories = tmp_path / "stories"
        stories.mkdir()
        bad = stories / "broken.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(CorpusFormatError, match="broken.json"):
            load_corpus(tmp_path)

    def test_duplicate_story_ids_keep_first(self, corpus):
        story = corpus.story("the-snow-child")
        clone = Story(
            story_id="the-snow-child",
            title="imposter",
            split=Split.TEST,
            sections=story.sections,
        )
        merged = Corpus([story, clone], [])
        assert merged.story("the-snow-child").title == "The Snow Child"

    def test_csv_per_book_profile(self):
        corpus = load_corpus(CSV_CORPUS, "csv_per_book")
        assert len(corpus.stories) == 1
        story = corpus.story("tiny-tale")
        assert [s.index for s in story.sections] == [1, 2]
        pairs = corpus.pairs_in_split("train")
        assert len(pairs) == 2
        assert pairs[0].element is NarrativeElement.SETTING

    def test_validation_error_lists_every_violation(self):
        sections = (Section("s1", 1, "once upon a time."), Section("s1", 2, "the end."))
        story = Story(story_id="s1", title="t", split=Split.TRAIN, sections=sections)
        bad_pairs = [
            QAPair(
                pair_id="p1",
                story_id="s1",
                section_indices=(9,),  # missing section
                question="q?",
                answer="",  # empty answer
                element=NarrativeElement.ACTION,
            ),
            QAPair(
                pair_id="p2",
                story_id="ghost",  # unknown story
                section_indices=(1,),
                question="q?",
                answer="a",
                element=NarrativeElement.ACTION,
            ),
        ]
        with pytest.raises(CorpusValidationError) as excinfo:
            Corpus([story], bad_pairs)
        violations = excinfo.value.violations
        assert len(violations) == 3
        assert any("empty answer" in v for v in violations)
        assert any("missing section 9" in v for v in violations)
        assert any("unknown story" in v for v in violations)

    def test_origin_system_tag_consistency(self):
        with pytest.raises(ValueError):
            # dataclass invariant checked at corpus level
            sections = (Section("s1", 1, "a tale."), Section("s1", 2, "the end."))
            story = Story("s1", "t", Split.TRAIN, sections)
            pair = QAPair(
                pair_id="p1",
                story_id="s1",
                section_indices=(1,),
                question="q?",
                answer="a",
                element=NarrativeElement.ACTION,
                origin=Origin.GENERATED,
                system_tag=None,
            )
            try:
                Corpus([story], [pair])
            except CorpusValidationError as exc:
                raise ValueError(str(exc)) from exc

    def test_round_trip_canonical_json(self, corpus, tmp_path):
        save_corpus(corpus, tmp_path)
        reloaded = load_corpus(tmp_path)
        assert {s.story_id for s in reloaded.stories} == {s.story_id for s in corpus.stories}
        for story in corpus.stories:
            assert reloaded.story(story.story_id) == story
        assert sorted(p.pair_id for p in reloaded.pairs) == sorted(p.pair_id for p in corpus.pairs)
        for pair in corpus.pairs:
            match = next(p for p in reloaded.pairs if p.pair_id == pair.pair_id)
            assert match == pair


def _dist_tuple(d):
    return (d.mean, d.sd, d.min, d.max)


class TestStats:
    @pytest.mark.parametrize("split", ["train", "validation", "test"])
    def test_compute_stats_matches_manifest_exactly(self, corpus, fixture_manifest, split):
        stats = compute_stats(corpus, split)
        expected = fixture_manifest["splits"][split]
        assert stats.book_count == expected["book_count"]
        assert stats.qa_count == expected["qa_count"]
        for name, dist in expected["stats"].items():
            actual = getattr(stats, name)
            assert actual.mean == pytest.approx(dist["mean"], abs=1e-12), name
            assert actual.sd == pytest.approx(dist["sd"], abs=1e-12), name
            assert actual.min == dist["min"], name
            assert actual.max == dist["max"], name

    def test_single_story_split_has_zero_sd(self):
        sections = tuple(Section("solo", i, f"sentence number {i}.") for i in range(1, 5))
        story = Story("solo", "Solo", Split.TEST, sections)
        pairs = [
            QAPair(
                pair_id=f"p{i}",
                story_id="solo",
                section_indices=(i,),
                question=f"what is {i}?",
                answer=f"answer {i}",
                element=NarrativeElement.ACTION,
            )
            for i in range(1, 5)
        ]
        stats = compute_stats(Corpus([story], pairs), "test")
        assert _dist_tuple(stats.sections_per_story) == (4.0, 0.0, 4.0, 4.0)
        assert _dist_tuple(stats.questions_per_story) == (4.0, 0.0, 4.0, 4.0)

    def test_multi_section_pair_attributed_to_each_section(self, corpus):
        stats = compute_stats(corpus, "train")
        # junket-q7 references sections 2 and 3, so per-section counts sum to
        # qa_count + 1 while per-story counts sum to qa_count.
        per_section_total = (
            stats.questions_per_section.mean * 3  # three sections in the train story
        )
        assert round(per_section_total) == stats.qa_count + 1

    def test_min_le_mean_le_max_everywhere(self, corpus):
        for split in ("train", "validation", "test"):
            stats = compute_stats(corpus, split)
            for name, d in stats.as_dict().items():
                if name in ("book_count", "qa_count"):
                    continue
                assert d["min"] <= d["mean"] <= d["max"], name
                assert d["sd"] >= 0, name

    def test_empty_split_errors(self, corpus):
        solo = Corpus(
            [corpus.story("the-snow-child")],
            [p for p in corpus.pairs if p.story_id == "the-snow-child"],
        )
        with pytest.raises(ValueError, match="no stories"):
            compute_stats(solo, "train")

    def test_sections_with_zero_questions_allowed(self, corpus):
        stats = compute_stats(corpus, "validation")
        assert stats.questions_per_section.min == 0


class TestCategoryDistribution:
    @pytest.mark.parametrize("split", ["train", "validation", "test"])
    def test_matches_manifest(self, corpus, fixture_manifest, split):
        dist = category_distribution(corpus, split)
        expected = fixture_manifest["splits"][split]["categories"]
        for element, (count, fraction) in dist.items():
            assert count == expected[element.value]["count"]
            assert fraction == pytest.approx(expected[element.value]["fraction"], abs=1e-12)

    def test_counts_sum_to_qa_count_and_fractions_to_one(self, corpus):
        for split in ("train", "validation", "test"):
            dist = category_distribution(corpus, split)
            stats = compute_stats(corpus, split)
            assert sum(c for c, _ in dist.values()) == stats.qa_count
            assert sum(f for _, f in dist.values()) == pytest.approx(1.0, abs=1e-9)

    def test_zero_count_category_has_zero_fraction(self, corpus):
        dist = category_distribution(corpus, "validation")
        count, fraction = dist[NarrativeElement.PREDICTION]
        assert (count, fraction) == (0, 0.0)

    def test_missing_split_errors(self, corpus):
        solo = Corpus(
            [corpus.story("the-snow-child")],
            [p for p in corpus.pairs if p.story_id == "the-snow-child"],
        )
        with pytest.raises(ValueError):
            category_distribution(solo, "validation")
