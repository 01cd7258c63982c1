"""Storybook corpus model: stories, sections, QA pairs, and split statistics.

On disk the canonical layout is one JSON file per story under ``stories/``
plus a ``manifest.json`` mapping splits to story ids. A CSV-per-book reader is
provided for compatibility with datasets shipped as ``<book>-story.csv`` /
``<book>-questions.csv`` files grouped in split directories. Both layouts are
documented in ``docs/corpus-format.md``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CorpusFormatError, CorpusValidationError
from .evaluation import tokenize_for_rouge


class NarrativeElement(enum.Enum):
    """The seven comprehension categories a QA pair can target."""

    CHARACTER = "character"
    SETTING = "setting"
    FEELING = "feeling"
    ACTION = "action"
    CAUSAL_RELATIONSHIP = "causal_relationship"
    OUTCOME_RESOLUTION = "outcome_resolution"
    PREDICTION = "prediction"

    @classmethod
    def parse(cls, label: str) -> "NarrativeElement":
        normalized = label.strip().lower().replace(" ", "_").replace("-", "_")
        for member in cls:
            if member.value == normalized:
                return member
        raise ValueError(f"unknown narrative element label: {label!r}")


class Split(enum.Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"

    @classmethod
    def parse(cls, label: str) -> "Split":
        normalized = label.strip().lower()
        if normalized in ("val", "valid", "dev"):
            normalized = "validation"
        for member in cls:
            if member.value == normalized:
                return member
        raise ValueError(f"unknown split label: {label!r}")


class Origin(enum.Enum):
    GROUND_TRUTH = "ground_truth"
    GENERATED = "generated"


@dataclass(frozen=True)
class Section:
    story_id: str
    index: int
    text: str

    def violations(self) -> list[str]:
        out = []
        if self.index < 1:
            out.append(f"story '{self.story_id}' section index {self.index} is not positive")
        if not self.text.strip():
            out.append(f"story '{self.story_id}' section {self.index} has empty text")
        return out


@dataclass(frozen=True)
class Story:
    story_id: str
    title: str
    split: Split
    sections: tuple[Section, ...]

    def violations(self) -> list[str]:
        out = []
        if not self.story_id.strip():
            out.append("story with empty story_id")
        if len(self.sections) < 2:
            out.append(f"story '{self.story_id}' has {len(self.sections)} section(s); minimum is 2")
        indices = [s.index for s in self.sections]
        if indices != list(range(1, len(indices) + 1)):
            out.append(
                f"story '{self.story_id}' sections are not contiguously indexed from 1: {indices}"
            )
        for section in self.sections:
            out.extend(section.violations())
        return out

    def section(self, index: int) -> Section:
        for s in self.sections:
            if s.index == index:
                return s
        raise KeyError(f"story '{self.story_id}' has no section {index}")


@dataclass(frozen=True)
class QAPair:
    pair_id: str
    story_id: str
    section_indices: tuple[int, ...]
    question: str
    answer: str
    element: NarrativeElement
    origin: Origin = Origin.GROUND_TRUTH
    system_tag: str | None = None

    def violations(self) -> list[str]:
        out = []
        if not self.section_indices:
            out.append(f"pair '{self.pair_id}' has no section indices")
        if any(i < 1 for i in self.section_indices):
            out.append(f"pair '{self.pair_id}' has non-positive section indices")
        if not self.question.strip():
            out.append(f"pair '{self.pair_id}' has empty question")
        if not self.answer.strip():
            out.append(f"pair '{self.pair_id}' has empty answer")
        if self.origin is Origin.GROUND_TRUTH and self.system_tag is not None:
            out.append(f"pair '{self.pair_id}' is ground truth but carries system_tag")
        if self.origin is Origin.GENERATED and not self.system_tag:
            out.append(f"pair '{self.pair_id}' is generated but has no system_tag")
        return out


@dataclass(frozen=True)
class Distribution:
    mean: float
    sd: float
    min: float
    max: float


@dataclass(frozen=True)
class SplitStats:
    sections_per_story: Distribution
    tokens_per_story: Distribution
    tokens_per_section: Distribution
    questions_per_story: Distribution
    questions_per_section: Distribution
    tokens_per_question: Distribution
    tokens_per_answer: Distribution
    book_count: int
    qa_count: int

    def as_dict(self) -> dict:
        out: dict = {"book_count": self.book_count, "qa_count": self.qa_count}
        for name in (
            "sections_per_story",
            "tokens_per_story",
            "tokens_per_section",
            "questions_per_story",
            "questions_per_section",
            "tokens_per_question",
            "tokens_per_answer",
        ):
            d: Distribution = getattr(self, name)
            out[name] = {"mean": d.mean, "sd": d.sd, "min": d.min, "max": d.max}
        return out


class Corpus:
    """Immutable view over loaded stories and their QA pairs, indexed by split."""

    def __init__(self, stories: Iterable[Story], pairs: Iterable[QAPair]):
        self._stories: dict[str, Story] = {}
        for story in stories:
            # Duplicate ids keep the first occurrence.
            self._stories.setdefault(story.story_id, story)
        self._pairs: tuple[QAPair, ...] = tuple(pairs)
        self._validate()

    def _validate(self) -> None:
        violations: list[str] = []
        if not self._stories:
            violations.append("no stories found")
        for story in self._stories.values():
            violations.extend(story.violations())
        seen_pair_ids: set[str] = set()
        for pair in self._pairs:
            violations.extend(pair.violations())
            if pair.pair_id in seen_pair_ids:
                violations.append(f"duplicate pair_id '{pair.pair_id}'")
            seen_pair_ids.add(pair.pair_id)
            story = self._stories.get(pair.story_id)
            if story is None:
                violations.append(f"pair '{pair.pair_id}' references unknown story '{pair.story_id}'")
                continue
            known = {s.index for s in story.sections}
            for idx in pair.section_indices:
                if idx not in known:
                    violations.append(
                        f"pair '{pair.pair_id}' references missing section {idx} "
                        f"of story '{pair.story_id}'"
                    )
        if violations:
            raise CorpusValidationError(violations)

    @property
    def stories(self) -> tuple[Story, ...]:
        return tuple(self._stories.values())

    @property
    def pairs(self) -> tuple[QAPair, ...]:
        return self._pairs

    def story(self, story_id: str) -> Story:
        if story_id not in self._stories:
            raise KeyError(f"unknown story '{story_id}'")
        return self._stories[story_id]

    def has_story(self, story_id: str) -> bool:
        return story_id in self._stories

    def stories_in_split(self, split: Split | str) -> tuple[Story, ...]:
        split = Split.parse(split) if isinstance(split, str) else split
        return tuple(s for s in self._stories.values() if s.split is split)

    def pairs_in_split(self, split: Split | str) -> tuple[QAPair, ...]:
        story_ids = {s.story_id for s in self.stories_in_split(split)}
        return tuple(p for p in self._pairs if p.story_id in story_ids)

    def section_text(self, story_id: str, indices: Iterable[int]) -> str:
        """Concatenated text of the referenced sections, in index order."""
        story = self.story(story_id)
        return " ".join(story.section(i).text for i in sorted(set(indices)))


# ---------------------------------------------------------------------------
# Loading and saving


def _story_from_dict(data: Mapping, path: str) -> tuple[Story, list[QAPair]]:
    try:
        sections = tuple(
            Section(story_id=data["story_id"], index=int(s["index"]), text=s["text"])
            for s in data["sections"]
        )
        story = Story(
            story_id=data["story_id"],
            title=data.get("title", data["story_id"]),
            split=Split.parse(data["split"]),
            sections=sections,
        )
        pairs = []
        for p in data.get("qa_pairs", []):
            pairs.append(
                QAPair(
                    pair_id=p["pair_id"],
                    story_id=data["story_id"],
                    section_indices=tuple(int(i) for i in p["section_indices"]),
                    question=p["question"],
                    answer=p["answer"],
                    element=NarrativeElement.parse(p["element"]),
                    origin=Origin(p.get("origin", "ground_truth")),
                    system_tag=p.get("system_tag"),
                )
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusFormatError(f"malformed story record: {exc}", path=path) from exc
    return story, pairs


def _load_canonical_json(root: Path) -> Corpus:
    manifest_path = root / "manifest.json"
    stories_dir = root / "stories"
    story_files: list[Path]
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"invalid manifest JSON: {exc}", path=str(manifest_path)) from exc
        story_files = [
            stories_dir / f"{story_id}.json"
            for split_ids in manifest.get("splits", {}).values()
            for story_id in split_ids
        ]
    else:
        story_files = sorted(stories_dir.glob("*.json")) if stories_dir.exists() else []

    stories: list[Story] = []
    pairs: list[QAPair] = []
    for path in story_files:
        if not path.exists():
            raise CorpusFormatError("story file listed in manifest is missing", path=str(path))
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"invalid story JSON: {exc}", path=str(path)) from exc
        story, story_pairs = _story_from_dict(data, str(path))
        stories.append(story)
        pairs.extend(story_pairs)
    return Corpus(stories, pairs)


def _load_csv_per_book(root: Path) -> Corpus:
    stories: list[Story] = []
    pairs: list[QAPair] = []
    for split_dir in sorted(root.iterdir()) if root.exists() else []:
        if not split_dir.is_dir():
            continue
        try:
            split = Split.parse(split_dir.name)
        except ValueError:
            continue
        for story_csv in sorted(split_dir.glob("*-story.csv")):
            book = story_csv.name[: -len("-story.csv")]
            sections = []
            with story_csv.open(encoding="utf-8", newline="") as fh:
                for row in csv.DictReader(fh):
                    try:
                        sections.append(
                            Section(story_id=book, index=int(row["section"]), text=row["text"])
                        )
                    except (KeyError, TypeError, ValueError) as exc:
                        raise CorpusFormatError(
                            f"malformed story row: {exc}", path=str(story_csv), record=str(row)
                        ) from exc
            sections.sort(key=lambda s: s.index)
            stories.append(
                Story(story_id=book, title=book.replace("-", " "), split=split,
                      sections=tuple(sections))
            )
            questions_csv = split_dir / f"{book}-questions.csv"
            if not questions_csv.exists():
                continue
            with questions_csv.open(encoding="utf-8", newline="") as fh:
                for i, row in enumerate(csv.DictReader(fh), start=1):
                    try:
                        raw_sections = str(row.get("cor_section") or row.get("sections") or "")
                        indices = tuple(
                            int(part) for part in raw_sections.replace(";", ",").split(",") if part.strip()
                        )
                        pairs.append(
                            QAPair(
                                pair_id=row.get("pair_id") or f"{book}-q{i}",
                                story_id=book,
                                section_indices=indices,
                                question=row["question"],
                                answer=row.get("answer") or row.get("answer1", ""),
                                element=NarrativeElement.parse(
                                    row.get("attribute") or row.get("element", "")
                                ),
                            )
                        )
                    except (KeyError, TypeError, ValueError) as exc:
                        raise CorpusFormatError(
                            f"malformed question row: {exc}",
                            path=str(questions_csv),
                            record=str(row),
                        ) from exc
    return Corpus(stories, pairs)


def load_corpus(root_path: str | Path, format_profile: str = "canonical_json") -> Corpus:
    """Load and validate a corpus from disk.

    ``format_profile`` is ``canonical_json`` or ``csv_per_book``. Parse failures
    raise :class:`CorpusFormatError` naming the file; invariant violations raise
    :class:`CorpusValidationError` listing every violation.
    """
    root = Path(root_path)
    if not root.exists():
        raise FileNotFoundError(f"corpus root does not exist: {root}")
    if format_profile == "canonical_json":
        return _load_canonical_json(root)
    if format_profile == "csv_per_book":
        return _load_csv_per_book(root)
    raise ValueError(f"unknown format profile: {format_profile!r}")


def story_to_dict(story: Story, pairs: Iterable[QAPair]) -> dict:
    return {
        "story_id": story.story_id,
        "title": story.title,
        "split": story.split.value,
        "sections": [{"index": s.index, "text": s.text} for s in story.sections],
        "qa_pairs": [
            {
                "pair_id": p.pair_id,
                "section_indices": list(p.section_indices),
                "question": p.question,
                "answer": p.answer,
                "element": p.element.value,
                "origin": p.origin.value,
                **({"system_tag": p.system_tag} if p.system_tag else {}),
            }
            for p in pairs
        ],
    }


def save_corpus(corpus: Corpus, root_path: str | Path) -> None:
    """Write the canonical JSON layout: stories/*.json plus manifest.json."""
    root = Path(root_path)
    (root / "stories").mkdir(parents=True, exist_ok=True)
    splits: dict[str, list[str]] = {s.value: [] for s in Split}
    for story in corpus.stories:
        splits[story.split.value].append(story.story_id)
        story_pairs = [p for p in corpus.pairs if p.story_id == story.story_id]
        payload = story_to_dict(story, story_pairs)
        path = root / "stories" / f"{story.story_id}.json"
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    manifest = {"splits": {k: v for k, v in splits.items() if v}}
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Statistics


def _distribution(values: list[float]) -> Distribution:
    if not values:
        return Distribution(mean=0.0, sd=0.0, min=0, max=0)
    n = len(values)
    mean = sum(values) / n
    # Population standard deviation; see docs/corpus-format.md for the choice.
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
    return Distribution(mean=mean, sd=sd, min=min(values), max=max(values))


def compute_stats(corpus: Corpus, split: Split | str) -> SplitStats:
    """Distribution statistics for one split, tokenized with the metric tokenizer."""
    split = Split.parse(split) if isinstance(split, str) else split
    stories = corpus.stories_in_split(split)
    if not stories:
        raise ValueError(f"split '{split.value}' has no stories")
    pairs = corpus.pairs_in_split(split)

    sections_per_story = [float(len(s.sections)) for s in stories]
    tokens_per_section = []
    tokens_per_story = []
    for story in stories:
        counts = [len(tokenize_for_rouge(sec.text)) for sec in story.sections]
        tokens_per_section.extend(float(c) for c in counts)
        tokens_per_story.append(float(sum(counts)))

    per_story_questions = {s.story_id: 0 for s in stories}
    # A pair referencing several sections counts once toward each of them.
    per_section_questions = {
        (s.story_id, sec.index): 0 for s in stories for sec in s.sections
    }
    for pair in pairs:
        per_story_questions[pair.story_id] += 1
        for idx in pair.section_indices:
            per_section_questions[(pair.story_id, idx)] += 1

    return SplitStats(
        sections_per_story=_distribution(sections_per_story),
        tokens_per_story=_distribution(tokens_per_story),
        tokens_per_section=_distribution(tokens_per_section),
        questions_per_story=_distribution([float(v) for v in per_story_questions.values()]),
        questions_per_section=_distribution([float(v) for v in per_section_questions.values()]),
        tokens_per_question=_distribution(
            [float(len(tokenize_for_rouge(p.question))) for p in pairs]
        ),
        tokens_per_answer=_distribution(
            [float(len(tokenize_for_rouge(p.answer))) for p in pairs]
        ),
        book_count=len(stories),
        qa_count=len(pairs),
    )


def category_distribution(
    corpus: Corpus, split: Split | str
) -> dict[NarrativeElement, tuple[int, float]]:
    """Count and fraction of QA pairs per narrative element for one split."""
    split = Split.parse(split) if isinstance(split, str) else split
    if not corpus.stories_in_split(split):
        raise ValueError(f"split '{split.value}' has no stories")
    pairs = corpus.pairs_in_split(split)
    total = len(pairs)
    counts = {element: 0 for element in NarrativeElement}
    for pair in pairs:
        counts[pair.element] += 1
    return {
        element: (count, count / total if total else 0.0)
        for element, count in counts.items()
    }
