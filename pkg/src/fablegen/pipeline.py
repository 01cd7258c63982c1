"""Orchestration of the three-stage pipeline and the 2-step baseline.

Three-stage: rule-based answer extraction, answer-conditioned question
generation, classifier ranking with top-N selection per section. The 2-step
baseline generates questions from the section text first, then answers each
question in a second pass, with no ranking stage.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .answer_extract import ExtractionLimits, extract_candidate_answers
from .corpus import Story
from .errors import ConfigError, FablegenError
from .evaluation import rouge_l, tokenize_for_rouge
from .lingann import get_annotation_backend
from .qgen import (
    GenerationConfig,
    QGRequest,
    generate_answer,
    generate_question,
    get_qg_backend,
)
from .ranker import (
    FallbackRanker,
    RankedQAPair,
    RankerInputLayout,
    load_ranker,
    score,
    select_top_n,
)

MODES = ("three_stage", "two_step_baseline")


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "three_stage"
    top_n: int = 3
    limits: ExtractionLimits = ExtractionLimits()
    qg_backend_id: str = "template"
    answer_backend_id: str = "template"
    ranker_id: str = "fallback"
    annotation_backend_id: str = "reference"
    ranker_layout: RankerInputLayout = RankerInputLayout()
    generation: GenerationConfig = GenerationConfig()
    judge_threshold: float = 0.5
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown pipeline mode {self.mode!r}")
        if self.top_n < 1:
            raise ConfigError("top_n must be >= 1")
        if not (0.0 < self.judge_threshold <= 1.0):
            raise ConfigError("judge_threshold must be in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass
class QAGResult:
    """Per-section output plus per-section error records (one bad section
    never aborts the others)."""

    pairs: dict[int, list[RankedQAPair]] = field(default_factory=dict)
    errors: dict[int, str] = field(default_factory=dict)

    def all_pairs(self) -> list[RankedQAPair]:
        out: list[RankedQAPair] = []
        for idx in sorted(self.pairs):
            out.extend(self.pairs[idx])
        return out


def get_ranker(ranker_id: str):
    if ranker_id == "fallback":
        return FallbackRanker()
    path = Path(ranker_id)
    if path.is_dir() and (path / "manifest.json").exists():
        return load_ranker(path)
    raise ConfigError(f"unknown ranker '{ranker_id}'")


def _effective_workers(config: PipelineConfig, *backends) -> int:
    limit = config.workers
    for backend in backends:
        cap = getattr(backend, "max_concurrency", None)
        if cap is not None:
            limit = min(limit, cap)
    return max(1, limit)


def _run_sections(story: Story, config: PipelineConfig, worker, *backends) -> QAGResult:
    result = QAGResult()

    def guarded(section):
        try:
            return section.index, worker(section), None
        except FablegenError as exc:
            return section.index, None, str(exc)

    workers = _effective_workers(config, *backends)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(guarded, story.sections))
    else:
        outcomes = [guarded(section) for section in story.sections]
    for index, pairs, error in outcomes:
        if error is not None:
            result.errors[index] = error
        else:
            result.pairs[index] = pairs
    return result


def run_qag(story: Story, config: PipelineConfig) -> QAGResult:
    """Three-stage pipeline: extract, generate a question per candidate, rank,
    keep the top N per section. Idempotent for deterministic backends."""
    if config.mode != "three_stage":
        raise ConfigError(f"run_qag requires mode 'three_stage', got {config.mode!r}")
    annotation_backend = get_annotation_backend(config.annotation_backend_id)
    qg_backend = get_qg_backend(config.qg_backend_id)
    ranker = get_ranker(config.ranker_id)

    def worker(section):
        candidates = extract_candidate_answers(section, annotation_backend, config.limits)
        ranked: list[RankedQAPair] = []
        for candidate in candidates:
            question = generate_question(
                QGRequest(
                    section_text=section.text,
                    answer_text=candidate.text,
                    candidate=candidate,
                ),
                qg_backend,
                config.generation,
            )
            pair_score = score(
                section.text, question, candidate.text, ranker, config.ranker_layout
            )
            ranked.append(
                RankedQAPair(
                    question=question,
                    answer=candidate.text,
                    score=pair_score,
                    section_index=section.index,
                    rank_hint=candidate.rank_hint,
                    provenance=candidate,
                    story_id=story.story_id,
                )
            )
        return select_top_n(ranked, config.top_n)

    return _run_sections(story, config, worker, annotation_backend, qg_backend)


def run_two_step(story: Story, config: PipelineConfig) -> QAGResult:
    """Question-first baseline: generate up to top_n questions per section,
    then answer each against the section. No ranking stage; output order is
    generation order and scores just preserve it."""
    if config.mode != "two_step_baseline":
        raise ConfigError(f"run_two_step requires mode 'two_step_baseline', got {config.mode!r}")
    question_backend = get_qg_backend(config.qg_backend_id)
    if not hasattr(question_backend, "generate_questions"):
        raise ConfigError(
            f"backend '{config.qg_backend_id}' cannot generate questions from section text alone"
        )
    answer_backend = get_qg_backend(config.answer_backend_id)

    def worker(section):
        questions = question_backend.generate_questions(
            section.text, config.top_n, config.generation
        )
        pairs: list[RankedQAPair] = []
        for i, raw_question in enumerate(questions):
            question = " ".join(raw_question.split())
            if not question.endswith("?"):
                question += "?"
            answer = generate_answer(section.text, question, answer_backend, config.generation)
            pairs.append(
                RankedQAPair(
                    question=question,
                    answer=answer,
                    score=1.0 / (1 + i),
                    section_index=section.index,
                    rank_hint=i,
                    provenance=None,
                    story_id=story.story_id,
                )
            )
        return pairs

    return _run_sections(story, config, worker, question_backend, answer_backend)


def run_pipeline(story: Story, config: PipelineConfig) -> QAGResult:
    if config.mode == "three_stage":
        return run_qag(story, config)
    return run_two_step(story, config)


# ---------------------------------------------------------------------------
# Answer judging for the interactive service


@dataclass(frozen=True)
class Verdict:
    correct: bool
    similarity: float
    feedback_hint: str  # exact | partial | miss

    def to_dict(self) -> dict:
        return {
            "correct": self.correct,
            "similarity": self.similarity,
            "feedback_hint": self.feedback_hint,
        }


def judge_answer(user_answer: str, gold_answer: str, threshold: float = 0.5) -> Verdict:
    """Rouge-L F1 between the user's answer and the gold answer.

    ``correct`` iff similarity >= threshold; the hint is ``exact`` at 1.0,
    ``miss`` below 0.2, ``partial`` otherwise. An empty user answer is a miss,
    not an error.
    """
    if not gold_answer.strip():
        raise ValueError("judge_answer requires a non-empty gold answer")
    user_tokens = tokenize_for_rouge(user_answer)
    if not user_tokens:
        return Verdict(correct=False, similarity=0.0, feedback_hint="miss")
    similarity = rouge_l(user_tokens, tokenize_for_rouge(gold_answer)).f1
    if similarity == 1.0:
        hint = "exact"
    elif similarity < 0.2:
        hint = "miss"
    else:
        hint = "partial"
    return Verdict(correct=similarity >= threshold, similarity=similarity, feedback_hint=hint)
