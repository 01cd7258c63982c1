"""Rouge-L scoring and the MAP@N metric used to compare QA generation systems.

A generated QA pair is judged by the Rouge-L precision of its question+answer
concatenation against a reference question+answer concatenation. MAP@N takes,
for every reference pair of a section, the best precision among the top N
generated pairs of that section, and averages over all reference pairs.
The generated string is always the candidate (precision denominator) and the
reference string is the ground truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

# Covers ASCII punctuation plus the curly quote / dash variants common in
# digitized storybook text.
_PUNCT_CHARS = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~‘’“”—–…"


def tokenize_for_rouge(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation, drop empties.

    No stemming and no stopword removal. This is the single tokenization
    contract shared by the metric code and the corpus statistics.
    """
    tokens = []
    for raw in text.lower().split():
        stripped = raw.strip(_PUNCT_CHARS)
        if stripped:
            tokens.append(stripped)
    return tokens


@dataclass(frozen=True)
class RougeResult:
    lcs_length: int
    precision: float
    recall: float
    f1: float


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence, O(len(a) * len(b))."""
    if not a or not b:
        return 0
    # Single rolling row keeps memory linear in the shorter sequence.
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        curr = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[len(b)]


def rouge_l(candidate_tokens: Sequence[str], reference_tokens: Sequence[str]) -> RougeResult:
    """Rouge-L over two token sequences. Empty inputs yield zero scores."""
    lcs = _lcs_length(candidate_tokens, reference_tokens)
    precision = lcs / len(candidate_tokens) if candidate_tokens else 0.0
    recall = lcs / len(reference_tokens) if reference_tokens else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return RougeResult(lcs_length=lcs, precision=precision, recall=recall, f1=f1)


def qa_concat(question: str, answer: str) -> str:
    """Question first, then a single space, then the answer."""
    if not question.strip() or not answer.strip():
        raise ValueError("qa_concat requires non-empty question and answer")
    return f"{question} {answer}"


def _qa_of(pair: Any) -> tuple[str, str]:
    """Accept (question, answer) tuples, dicts, or objects with those attributes."""
    if isinstance(pair, tuple):
        return pair[0], pair[1]
    if isinstance(pair, Mapping):
        return pair["question"], pair["answer"]
    return pair.question, pair.answer


def _pair_precision(generated: Any, gold: Any) -> float:
    gq, ga = _qa_of(generated)
    rq, ra = _qa_of(gold)
    candidate = tokenize_for_rouge(qa_concat(gq, ga))
    reference = tokenize_for_rouge(qa_concat(rq, ra))
    return rouge_l(candidate, reference).precision


def map_at_n(
    gold_by_section: Mapping[Any, Sequence[Any]],
    generated_by_section: Mapping[Any, Sequence[Any]],
    n: int,
) -> float:
    """Mean over gold pairs of the best Rouge-L precision among the top-n generated.

    Generated lists must already be in rank order; only the first ``n`` entries
    per section are considered. Sections with no generated pairs contribute a
    best score of 0 for each of their gold pairs; sections with no gold pairs
    contribute nothing. The mean is global over gold pairs, not per-section.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    best_scores: list[float] = []
    for section, gold_pairs in gold_by_section.items():
        if not gold_pairs:
            continue
        top = list(generated_by_section.get(section, ()))[:n]
        for gold in gold_pairs:
            if top:
                best = max(_pair_precision(gen, gold) for gen in top)
            else:
                best = 0.0
            best_scores.append(best)
    if not best_scores:
        raise ValueError("no gold pairs in scope; MAP@N is undefined")
    return sum(best_scores) / len(best_scores)


@dataclass
class EvalReport:
    """MAP@N per system plus per-gold-pair diagnostics at the largest N."""

    map_scores: dict[str, dict[int, float]]
    diagnostics: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "map": {
                tag: {str(n): score for n, score in sorted(by_n.items())}
                for tag, by_n in sorted(self.map_scores.items())
            },
            "diagnostics": self.diagnostics,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    def to_text_table(self) -> str:
        ns = sorted({n for by_n in self.map_scores.values() for n in by_n})
        header = ["system"] + [f"MAP@{n}" for n in ns]
        rows = [header]
        for tag in sorted(self.map_scores):
            row = [tag] + [f"{self.map_scores[tag].get(n, 0.0):.3f}" for n in ns]
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)))
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines)


def evaluate_systems(
    corpus,
    split,
    outputs: Mapping[str, Sequence[Any]],
    ns: Iterable[int] = (1, 3, 5, 10),
) -> EvalReport:
    """Score each system's generated pairs against the gold pairs of a split.

    ``outputs`` maps a system tag to generated pairs; each generated pair must
    carry ``story_id``, ``section_index``, ``question`` and ``answer`` (attributes
    or mapping keys) and be listed in rank order. Unknown story or section
    references raise ``ValueError``.
    """
    from .corpus import Split  # local import to avoid a cycle

    split = Split.parse(split) if not isinstance(split, Split) else split
    ns = sorted(set(ns))
    if not ns:
        raise ValueError("at least one N is required")

    gold_by_section: dict[tuple[str, int], list] = {}
    for story in corpus.stories_in_split(split):
        for section in story.sections:
            gold_by_section[(story.story_id, section.index)] = []
    for pair in corpus.pairs_in_split(split):
        for idx in pair.section_indices:
            gold_by_section[(pair.story_id, idx)].append(pair)

    def _field(item: Any, name: str) -> Any:
        if isinstance(item, Mapping):
            return item[name]
        return getattr(item, name)

    reports: dict[str, dict[int, float]] = {}
    grouped_outputs: dict[str, dict[tuple[str, int], list]] = {}
    for tag, generated in outputs.items():
        grouped: dict[tuple[str, int], list] = {}
        for item in generated:
            key = (_field(item, "story_id"), int(_field(item, "section_index")))
            if key not in gold_by_section:
                raise ValueError(
                    f"system '{tag}' references unknown section {key[1]} of story '{key[0]}'"
                )
            grouped.setdefault(key, []).append(item)
        grouped_outputs[tag] = grouped
        reports[tag] = {n: map_at_n(gold_by_section, grouped, n) for n in ns}

    largest = ns[-1]
    diagnostics: list[dict[str, Any]] = []
    for tag, grouped in grouped_outputs.items():
        for key, gold_pairs in gold_by_section.items():
            if not gold_pairs:
                continue
            top = grouped.get(key, ())[:largest]
            for gold in gold_pairs:
                best_pair = None
                best_score = 0.0
                for gen in top:
                    score = _pair_precision(gen, gold)
                    if score > best_score or best_pair is None:
                        best_pair, best_score = gen, score
                gq, ga = _qa_of(gold)
                diag = {
                    "system": tag,
                    "story_id": key[0],
                    "section_index": key[1],
                    "gold_question": gq,
                    "gold_answer": ga,
                    "best_score": best_score,
                }
                if best_pair is not None:
                    bq, ba = _qa_of(best_pair)
                    diag["best_question"] = bq
                    diag["best_answer"] = ba
                diagnostics.append(diag)
    return EvalReport(map_scores=reports, diagnostics=diagnostics)
