"""Heuristic candidate-answer extraction covering all seven narrative elements.

Entities and noun chunks provide answers for character, setting, and feeling
questions; predicate frames provide event answers (subject+verb+object and
verb-phrase renderings) for action, causal-relationship, outcome-resolution,
and prediction questions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import NarrativeElement, Section
from .lingann import Annotation, AnnotationBackend, Span, annotate, emotion_words

EVENT_ELEMENTS = frozenset(
    {
        NarrativeElement.ACTION,
        NarrativeElement.CAUSAL_RELATIONSHIP,
        NarrativeElement.OUTCOME_RESOLUTION,
        NarrativeElement.PREDICTION,
    }
)
_NOMINAL_ELEMENTS = frozenset(
    {NarrativeElement.CHARACTER, NarrativeElement.SETTING, NarrativeElement.FEELING}
)
_SOURCE_ORDER = {"entity": 0, "noun_chunk": 1, "svo_event": 2}


@dataclass(frozen=True)
class ExtractionLimits:
    # Sections average ~150 tokens; unbounded candidates explode generation cost.
    max_candidates_per_section: int = 32


@dataclass(frozen=True)
class CandidateAnswer:
    text: str
    section_index: int
    source: str  # entity | noun_chunk | svo_event
    target_elements: frozenset[NarrativeElement]
    provenance_spans: tuple[Span, ...]
    rank_hint: int
    subject_text: str | None = None  # surface subject for event candidates

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "section_index": self.section_index,
            "source": self.source,
            "target_elements": sorted(e.value for e in self.target_elements),
            "provenance_spans": [list(s) for s in self.provenance_spans],
            "rank_hint": self.rank_hint,
            "subject_text": self.subject_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CandidateAnswer":
        return cls(
            text=data["text"],
            section_index=data["section_index"],
            source=data["source"],
            target_elements=frozenset(
                NarrativeElement.parse(e) for e in data["target_elements"]
            ),
            provenance_spans=tuple((s[0], s[1]) for s in data["provenance_spans"]),
            rank_hint=data["rank_hint"],
            subject_text=data.get("subject_text"),
        )


def _entity_targets(label: str) -> frozenset[NarrativeElement]:
    if label == "person":
        return frozenset({NarrativeElement.CHARACTER})
    if label in ("location", "time"):
        return frozenset({NarrativeElement.SETTING})
    return frozenset({NarrativeElement.CHARACTER, NarrativeElement.SETTING})


def extract_entity_chunk_answers(
    annotation: Annotation, section_index: int = 1
) -> list[CandidateAnswer]:
    """One candidate per entity mention and per noun chunk, deduped case-insensitively.

    Person entities target character; location and time entities target setting;
    chunks headed by an emotion-lexicon word target feeling; remaining chunks
    target both character and setting.
    """
    emotions = emotion_words()
    raw: list[CandidateAnswer] = []
    for ent in annotation.entities:
        text = annotation.span_text(ent.token_span)
        raw.append(
            CandidateAnswer(
                text=text,
                section_index=section_index,
                source="entity",
                target_elements=_entity_targets(ent.label),
                provenance_spans=(ent.token_span,),
                rank_hint=ent.token_span[0],
            )
        )
    for chunk in annotation.chunks:
        head = annotation.tokens[chunk.head_token_idx]
        if head.lemma in emotions or head.text.lower() in emotions:
            targets = frozenset({NarrativeElement.FEELING})
        else:
            targets = frozenset({NarrativeElement.CHARACTER, NarrativeElement.SETTING})
        raw.append(
            CandidateAnswer(
                text=annotation.span_text(chunk.token_span),
                section_index=section_index,
                source="noun_chunk",
                target_elements=targets,
                provenance_spans=(chunk.token_span,),
                rank_hint=chunk.token_span[0],
            )
        )
    raw.sort(key=lambda c: (c.rank_hint, _SOURCE_ORDER[c.source]))
    return _dedup_keep_first(raw)


def extract_event_answers(
    annotation: Annotation, section_index: int = 1
) -> list[CandidateAnswer]:
    """Event candidates from predicate frames, targeting the four event elements.

    Each frame yields the full subject+verb+object rendering in document order
    and, when a subject exists, the verb-phrase rendering on its own.
    """
    raw: list[CandidateAnswer] = []
    for frame in annotation.frames:
        trigger = frame.trigger_token_idx
        modifier = frame.argument("modifier")
        vp_span: Span = (trigger, modifier[1] if modifier else trigger + 1)
        vp_text = annotation.span_text(vp_span)
        subject = frame.argument("subject")
        if subject is not None:
            subject_text = annotation.span_text(subject)
            if subject[1] <= trigger:
                full_text = f"{subject_text} {vp_text}"
                spans: tuple[Span, ...] = (subject, vp_span)
                hint = subject[0]
            else:
                # Inverted or post-verbal subject: keep document order.
                full_text = vp_text
                spans = (vp_span,)
                hint = vp_span[0]
            raw.append(
                CandidateAnswer(
                    text=full_text,
                    section_index=section_index,
                    source="svo_event",
                    target_elements=EVENT_ELEMENTS,
                    provenance_spans=spans,
                    rank_hint=hint,
                    subject_text=subject_text,
                )
            )
            raw.append(
                CandidateAnswer(
                    text=vp_text,
                    section_index=section_index,
                    source="svo_event",
                    target_elements=EVENT_ELEMENTS,
                    provenance_spans=(vp_span,),
                    rank_hint=vp_span[0],
                    subject_text=subject_text,
                )
            )
        else:
            raw.append(
                CandidateAnswer(
                    text=vp_text,
                    section_index=section_index,
                    source="svo_event",
                    target_elements=EVENT_ELEMENTS,
                    provenance_spans=(vp_span,),
                    rank_hint=vp_span[0],
                )
            )
    return _dedup_keep_first(raw)


def _dedup_keep_first(candidates: list[CandidateAnswer]) -> list[CandidateAnswer]:
    seen: set[str] = set()
    out: list[CandidateAnswer] = []
    for cand in candidates:
        key = cand.text.lower()
        if key in seen or not cand.text.strip():
            continue
        seen.add(key)
        out.append(cand)
    return out


def merge_candidates(
    nominal: list[CandidateAnswer],
    events: list[CandidateAnswer],
    limits: ExtractionLimits = ExtractionLimits(),
) -> list[CandidateAnswer]:
    """Dedup across sources, order by document position, truncate.

    On a text collision across sources the event variant wins because event
    answers serve four of the seven narrative elements.
    """
    by_text: dict[str, CandidateAnswer] = {}
    for cand in nominal:
        by_text.setdefault(cand.text.lower(), cand)
    for cand in events:
        key = cand.text.lower()
        if key in by_text and by_text[key].source != "svo_event":
            by_text[key] = cand
        else:
            by_text.setdefault(key, cand)

    merged = sorted(
        by_text.values(), key=lambda c: (c.rank_hint, _SOURCE_ORDER[c.source], c.text.lower())
    )
    return merged[: limits.max_candidates_per_section]


def extract_candidate_answers(
    section: Section,
    backend: AnnotationBackend,
    limits: ExtractionLimits = ExtractionLimits(),
) -> list[CandidateAnswer]:
    """Union of both extractors for one section, deduped, ordered, truncated."""
    annotation = annotate(section.text, backend)
    nominal = extract_entity_chunk_answers(annotation, section.index)
    events = extract_event_answers(annotation, section.index)
    return merge_candidates(nominal, events, limits)


def covered_elements(candidates: list[CandidateAnswer]) -> frozenset[NarrativeElement]:
    out: set[NarrativeElement] = set()
    for cand in candidates:
        out |= cand.target_elements
    return frozenset(out)


def reproduce_from_provenance(candidate: CandidateAnswer, annotation: Annotation) -> str:
    """Re-render a candidate's text from its provenance spans (oracle helper)."""
    return " ".join(annotation.span_text(span) for span in candidate.provenance_spans)
