"""Rank generated QA pairs by a classifier separating expert pairs from system output.

The learned ranker is a hashed bag-of-words logistic regression trained on
(section, question, answer) serializations; scoring uses the positive-class
probability. A deterministic bag-of-words cosine fallback ranker ships
alongside it so the pipeline runs with zero model weights:

    fallback score = cosine(count_vector(question + " " + answer),
                            count_vector(section)), clamped to [0, 1]
"""

from __future__ import annotations

import json
import random
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .answer_extract import CandidateAnswer
from .corpus import Corpus, QAPair
from .errors import RankerError
from .evaluation import tokenize_for_rouge


@dataclass(frozen=True)
class RankerInputLayout:
    order: str = "section_question_answer"  # or section_answer
    separator: str = " [sep] "

    def __post_init__(self):
        if self.order not in ("section_question_answer", "section_answer"):
            raise ValueError(f"unknown layout order {self.order!r}")
        if not self.separator:
            raise ValueError("separator must be non-empty")

    def serialize(self, section_text: str, question: str, answer: str) -> str:
        parts = [section_text.strip()]
        if self.order == "section_question_answer":
            parts.append(question.strip())
        parts.append(answer.strip())
        return self.separator.join(parts)


@dataclass(frozen=True)
class RankingExample:
    section_text: str
    question: str
    answer: str
    label: int  # 1 = ground truth, 0 = generated

    def __post_init__(self):
        if not self.section_text.strip() or not self.question.strip() or not self.answer.strip():
            raise ValueError("RankingExample requires non-empty texts")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


@dataclass(frozen=True)
class RankedQAPair:
    question: str
    answer: str
    score: float
    section_index: int
    rank_hint: int
    provenance: CandidateAnswer | None = None
    story_id: str = ""
    system_tag: str | None = None

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")

    def to_dict(self) -> dict:
        out = {
            "story_id": self.story_id,
            "section_index": self.section_index,
            "question": self.question,
            "answer": self.answer,
            "score": self.score,
            "rank_hint": self.rank_hint,
        }
        if self.system_tag is not None:
            out["system_tag"] = self.system_tag
        if self.provenance is not None:
            out["provenance"] = self.provenance.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RankedQAPair":
        return cls(
            question=data["question"],
            answer=data["answer"],
            score=float(data["score"]),
            section_index=int(data["section_index"]),
            rank_hint=int(data.get("rank_hint", 0)),
            provenance=(
                CandidateAnswer.from_dict(data["provenance"]) if data.get("provenance") else None
            ),
            story_id=data.get("story_id", ""),
            system_tag=data.get("system_tag"),
        )


@dataclass(frozen=True)
class RankerHyperparams:
    epochs: int = 300
    learning_rate: float = 0.5
    l2: float = 1e-4
    feature_dim: int = 4096
    seed: int = 13
    holdout_fraction: float = 0.10


# ---------------------------------------------------------------------------
# Dataset assembly


def _pair_fields(pair) -> tuple[str, Iterable[int], str, str]:
    if isinstance(pair, QAPair):
        return pair.story_id, pair.section_indices, pair.question, pair.answer
    return pair.story_id, (pair.section_index,), pair.question, pair.answer


def build_ranking_dataset(
    corpus: Corpus,
    gold_pairs: Sequence,
    generated_pairs: Sequence,
    seed: int = 13,
) -> list[RankingExample]:
    """Positives are all gold pairs, negatives all generated pairs; no subsampling.

    The result is shuffled with a fixed seed so downstream training is
    reproducible. Unknown story or section references raise ``RankerError``.
    """
    if not gold_pairs:
        raise RankerError("ranking dataset requires at least one gold pair")
    examples: list[RankingExample] = []
    for source, label in ((gold_pairs, 1), (generated_pairs, 0)):
        for pair in source:
            story_id, indices, question, answer = _pair_fields(pair)
            try:
                section_text = corpus.section_text(story_id, indices)
            except KeyError as exc:
                raise RankerError(f"pair references unknown section: {exc}") from exc
            examples.append(
                RankingExample(
                    section_text=section_text, question=question, answer=answer, label=label
                )
            )
    random.Random(seed).shuffle(examples)
    return examples


# ---------------------------------------------------------------------------
# Learned ranker


def _hash_features(text: str, dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize_for_rouge(text):
        vec[zlib.crc32(token.encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


class LearnedRanker:
    """Logistic regression over hashed token counts of the serialized input."""

    kind = "learned"

    def __init__(self, weights: np.ndarray, bias: float, layout: RankerInputLayout):
        self.weights = weights
        self.bias = bias
        self.layout = layout

    def score_text(self, serialized: str) -> float:
        x = _hash_features(serialized, self.weights.shape[0])
        z = float(self.weights @ x + self.bias)
        return float(1.0 / (1.0 + np.exp(-z)))


class FallbackRanker:
    """Deterministic bag-of-words cosine ranker; needs no training or weights."""

    kind = "fallback"
    layout: RankerInputLayout | None = None  # layout-agnostic

    def score_parts(self, section_text: str, question: str, answer: str) -> float:
        qa_tokens = tokenize_for_rouge(f"{question.strip()} {answer.strip()}")
        section_tokens = tokenize_for_rouge(section_text)
        if not qa_tokens or not section_tokens:
            return 0.0
        counts_a: dict[str, int] = {}
        counts_b: dict[str, int] = {}
        for t in qa_tokens:
            counts_a[t] = counts_a.get(t, 0) + 1
        for t in section_tokens:
            counts_b[t] = counts_b.get(t, 0) + 1
        dot = sum(c * counts_b.get(t, 0) for t, c in counts_a.items())
        norm_a = sum(c * c for c in counts_a.values()) ** 0.5
        norm_b = sum(c * c for c in counts_b.values()) ** 0.5
        if norm_a == 0 or norm_b == 0:
            return 0.0
        return max(0.0, min(1.0, dot / (norm_a * norm_b)))


def _holdout_split(
    examples: Sequence[RankingExample], fraction: float
) -> tuple[list[int], list[int]]:
    """Split example indices into train/holdout by section, never by example."""
    groups: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault(ex.section_text, []).append(i)
    ordered = sorted(groups.values(), key=lambda idxs: zlib.crc32(examples[idxs[0]].section_text.encode("utf-8")))
    target = max(1, int(round(fraction * len(examples))))
    holdout: list[int] = []
    for group in ordered:
        if len(holdout) >= target or len(holdout) + len(group) > len(examples) - 1:
            break
        holdout.extend(group)
    train = [i for i in range(len(examples)) if i not in set(holdout)]
    train_labels = {examples[i].label for i in train}
    if len(groups) < 2 or not holdout or len(train_labels) < 2:
        # Too few sections to hold any out; metrics fall back to the train set.
        return list(range(len(examples))), list(range(len(examples)))
    return train, holdout


def _classification_metrics(labels: np.ndarray, predictions: np.ndarray) -> dict[str, float]:
    tp = float(np.sum((predictions == 1) & (labels == 1)))
    fp = float(np.sum((predictions == 1) & (labels == 0)))
    fn = float(np.sum((predictions == 0) & (labels == 1)))
    accuracy = float(np.mean(predictions == labels)) if len(labels) else 0.0
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


def train_ranker(
    examples: Sequence[RankingExample],
    layout: RankerInputLayout = RankerInputLayout(),
    hyperparams: RankerHyperparams = RankerHyperparams(),
) -> tuple[LearnedRanker, dict[str, float]]:
    """Train the classification ranker; metrics come from a held-out 10% by section."""
    if not examples:
        raise ValueError("train_ranker requires at least one example")
    labels_present = {ex.label for ex in examples}
    if len(labels_present) < 2:
        raise RankerError("training data contains a single class; need both labels")

    train_idx, holdout_idx = _holdout_split(examples, hyperparams.holdout_fraction)
    dim = hyperparams.feature_dim
    features = np.stack(
        [_hash_features(layout.serialize(ex.section_text, ex.question, ex.answer), dim) for ex in examples]
    )
    labels = np.array([ex.label for ex in examples], dtype=np.float64)

    x_train, y_train = features[train_idx], labels[train_idx]
    rng = np.random.default_rng(hyperparams.seed)
    weights = rng.normal(0.0, 0.01, size=dim)
    bias = 0.0
    lr = hyperparams.learning_rate
    for _ in range(hyperparams.epochs):
        z = x_train @ weights + bias
        p = 1.0 / (1.0 + np.exp(-z))
        error = p - y_train
        grad_w = x_train.T @ error / len(y_train) + hyperparams.l2 * weights
        grad_b = float(np.mean(error))
        weights -= lr * grad_w
        bias -= lr * grad_b

    ranker = LearnedRanker(weights=weights, bias=bias, layout=layout)
    x_hold, y_hold = features[holdout_idx], labels[holdout_idx]
    probs = 1.0 / (1.0 + np.exp(-(x_hold @ weights + bias)))
    metrics = _classification_metrics(y_hold.astype(int), (probs >= 0.5).astype(int))
    metrics["holdout_examples"] = float(len(holdout_idx))
    metrics["held_out"] = float(holdout_idx != list(range(len(examples))))
    return ranker, metrics


def score(
    section_text: str,
    question: str,
    answer: str,
    ranker,
    layout: RankerInputLayout = RankerInputLayout(),
) -> float:
    """Score one QA pair in [0, 1]; deterministic for a fixed ranker handle."""
    if isinstance(ranker, FallbackRanker):
        return ranker.score_parts(section_text, question, answer)
    if getattr(ranker, "layout", None) is not None and ranker.layout != layout:
        raise RankerError(
            f"layout mismatch: ranker was trained with {ranker.layout}, scoring with {layout}"
        )
    return ranker.score_text(layout.serialize(section_text, question, answer))


def select_top_n(candidates: Sequence[RankedQAPair], n: int) -> list[RankedQAPair]:
    """Highest-scored n pairs; ties break by rank_hint then question text.

    Duplicate (question, answer) pairs collapse to the best-scored variant
    before truncation, so the output never contains duplicates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    best: dict[tuple[str, str], RankedQAPair] = {}
    for cand in candidates:
        key = (cand.question, cand.answer)
        kept = best.get(key)
        if kept is None or (cand.score, -cand.rank_hint) > (kept.score, -kept.rank_hint):
            best[key] = cand
    ordered = sorted(best.values(), key=lambda c: (-c.score, c.rank_hint, c.question))
    return ordered[:n]


# ---------------------------------------------------------------------------
# Handle persistence


def save_ranker(ranker, dir_path: str | Path) -> None:
    path = Path(dir_path)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(ranker, FallbackRanker):
        manifest = {"kind": "fallback"}
    else:
        manifest = {
            "kind": "learned",
            "layout": {"order": ranker.layout.order, "separator": ranker.layout.separator},
            "feature_dim": int(ranker.weights.shape[0]),
        }
        np.savez(path / "weights.npz", weights=ranker.weights, bias=np.array([ranker.bias]))
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_ranker(dir_path: str | Path):
    path = Path(dir_path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    if manifest["kind"] == "fallback":
        return FallbackRanker()
    data = np.load(path / "weights.npz")
    layout = RankerInputLayout(
        order=manifest["layout"]["order"], separator=manifest["layout"]["separator"]
    )
    return LearnedRanker(weights=data["weights"], bias=float(data["bias"][0]), layout=layout)
