"""Linguistic annotation contract plus a deterministic rule-based reference backend.

Backends produce :class:`Annotation` values: tokens with coarse POS and
character offsets, sentence spans, entity mentions, noun chunks, and
predicate frames (trigger verb with subject/object/modifier arguments).
The reference backend is pure and platform-independent so every heuristic
and pipeline test can run without model weights; a spaCy-backed full
backend can be plugged in where available.

Reference backend rules (frozen):
  sentences    split after runs of . ! ? plus immediately adjacent closing quotes
  tokens       alphanumeric runs (internal apostrophes/hyphens kept) or single
               punctuation characters; offsets in Unicode scalar values
  POS          lexicon lookup, then suffix rules, default noun/propn;
               -ing/-ed forms after a determiner, adjective, numeral, or
               possessive retag to adjective
  entities     maximal runs of capitalized tokens, function words excluded;
               labeled time/location via cue word lists, person otherwise
  noun chunks  optional determiner or possessive + adjectives/numerals +
               noun run; head is the last noun
  frames       each clause-leading verb chain opens a frame; subject is the
               nominal immediately left of the trigger (adverbs skipped,
               inherited from the previous frame of the sentence when the
               trigger is coordinated); object is the first nominal after the
               trigger inside the clause; the modifier argument spans from
               the trigger to the clause end
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Protocol, runtime_checkable

from .errors import AnnotationError

COARSE_POS = frozenset(
    {"noun", "propn", "verb", "adj", "adv", "pron", "det", "adp", "num", "punct", "other"}
)
ENTITY_LABELS = frozenset({"person", "location", "time", "org", "misc"})
FRAME_ROLES = frozenset({"subject", "object", "modifier"})

Span = tuple[int, int]

_TOKEN_RE = re.compile(r"\w+(?:['’\-]\w+)*|[^\w\s]", re.UNICODE)
_NUM_RE = re.compile(r"\d+(?:[.,]\d+)*")
_TERMINALS = {".", "!", "?"}
_QUOTES = {"'", '"', "’", "”", "»"}
_CLAUSE_CONJ = {"and", "but", "or"}
_CLAUSE_PUNCT = {",", ";", ":"}

_SUFFIX_RULES: tuple[tuple[str, str], ...] = (
    ("ly", "adv"),
    ("ing", "verb"),
    ("ed", "verb"),
    ("ous", "adj"),
    ("ful", "adj"),
    ("ive", "adj"),
    ("less", "adj"),
    ("able", "adj"),
    ("ible", "adj"),
    ("tion", "noun"),
    ("sion", "noun"),
    ("ment", "noun"),
    ("ness", "noun"),
    ("ity", "noun"),
    ("ship", "noun"),
    ("hood", "noun"),
)


@lru_cache(maxsize=1)
def _lexicon() -> dict:
    path = resources.files("fablegen").joinpath("data/reference_lexicon.json")
    return json.loads(path.read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def emotion_words() -> frozenset[str]:
    path = resources.files("fablegen").joinpath("data/emotion_lexicon.txt")
    return frozenset(path.read_text(encoding="utf-8").split())


@dataclass(frozen=True)
class Token:
    text: str
    lemma: str
    coarse_pos: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class EntityMention:
    token_span: Span
    label: str


@dataclass(frozen=True)
class NounChunk:
    token_span: Span
    head_token_idx: int


@dataclass(frozen=True)
class PredicateFrame:
    trigger_token_idx: int
    arguments: tuple[tuple[str, Span], ...]

    def argument(self, role: str) -> Span | None:
        for r, span in self.arguments:
            if r == role:
                return span
        return None


@dataclass(frozen=True)
class Annotation:
    text: str
    tokens: tuple[Token, ...]
    sentences: tuple[Span, ...]
    entities: tuple[EntityMention, ...]
    chunks: tuple[NounChunk, ...]
    frames: tuple[PredicateFrame, ...]

    def span_text(self, span: Span, skip_punct: bool = True) -> str:
        """Token texts joined by single spaces; punctuation tokens skipped."""
        parts = [
            t.text
            for t in self.tokens[span[0] : span[1]]
            if not (skip_punct and t.coarse_pos == "punct")
        ]
        return " ".join(parts)

    def sentence_of(self, token_idx: int) -> Span:
        for start, end in self.sentences:
            if start <= token_idx < end:
                return (start, end)
        raise IndexError(f"token {token_idx} is outside every sentence")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tokens": [
                {
                    "text": t.text,
                    "lemma": t.lemma,
                    "pos": t.coarse_pos,
                    "start": t.char_start,
                    "end": t.char_end,
                }
                for t in self.tokens
            ],
            "sentences": [list(s) for s in self.sentences],
            "entities": [{"span": list(e.token_span), "label": e.label} for e in self.entities],
            "chunks": [
                {"span": list(c.token_span), "head": c.head_token_idx} for c in self.chunks
            ],
            "frames": [
                {
                    "trigger": f.trigger_token_idx,
                    "arguments": [{"role": r, "span": list(s)} for r, s in f.arguments],
                }
                for f in self.frames
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Annotation":
        return cls(
            text=data["text"],
            tokens=tuple(
                Token(t["text"], t["lemma"], t["pos"], t["start"], t["end"])
                for t in data["tokens"]
            ),
            sentences=tuple((s[0], s[1]) for s in data["sentences"]),
            entities=tuple(
                EntityMention((e["span"][0], e["span"][1]), e["label"]) for e in data["entities"]
            ),
            chunks=tuple(
                NounChunk((c["span"][0], c["span"][1]), c["head"]) for c in data["chunks"]
            ),
            frames=tuple(
                PredicateFrame(
                    f["trigger"],
                    tuple((a["role"], (a["span"][0], a["span"][1])) for a in f["arguments"]),
                )
                for f in data["frames"]
            ),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def validate_annotation(ann: Annotation) -> list[str]:
    """Return a list of invariant violations (empty when the annotation is valid)."""
    problems: list[str] = []
    prev_end = -1
    for i, tok in enumerate(ann.tokens):
        if tok.char_start >= tok.char_end:
            problems.append(f"token {i} has empty span")
        if tok.char_start < prev_end:
            problems.append(f"token {i} overlaps the previous token")
        prev_end = tok.char_end
        if ann.text[tok.char_start : tok.char_end] != tok.text:
            problems.append(f"token {i} text does not match its offsets")
        if tok.coarse_pos not in COARSE_POS:
            problems.append(f"token {i} has unknown POS {tok.coarse_pos!r}")

    def _in_one_sentence(span: Span, what: str) -> None:
        if span[0] >= span[1] or span[0] < 0 or span[1] > len(ann.tokens):
            problems.append(f"{what} span {span} is empty or out of bounds")
            return
        if not any(s <= span[0] and span[1] <= e for s, e in ann.sentences):
            problems.append(f"{what} span {span} crosses a sentence boundary")

    for ent in ann.entities:
        _in_one_sentence(ent.token_span, "entity")
        if ent.label not in ENTITY_LABELS:
            problems.append(f"entity has unknown label {ent.label!r}")
    for chunk in ann.chunks:
        _in_one_sentence(chunk.token_span, "chunk")
        if not (chunk.token_span[0] <= chunk.head_token_idx < chunk.token_span[1]):
            problems.append(f"chunk head {chunk.head_token_idx} outside span {chunk.token_span}")
    for frame in ann.frames:
        trig = frame.trigger_token_idx
        if not (0 <= trig < len(ann.tokens)) or ann.tokens[trig].coarse_pos != "verb":
            problems.append(f"frame trigger {trig} is not a verb token")
            continue
        for role, span in frame.arguments:
            if role not in FRAME_ROLES:
                problems.append(f"frame argument has unknown role {role!r}")
            _in_one_sentence(span, f"frame {role}")
            if span[0] <= trig < span[1]:
                problems.append(f"frame {role} span {span} contains the trigger {trig}")
    return problems


@runtime_checkable
class AnnotationBackend(Protocol):
    backend_id: str
    max_concurrency: int | None

    def annotate(self, text: str) -> Annotation: ...


class ReferenceAnnotationBackend:
    """Pure rule-based backend; bit-identical output across runs and platforms."""

    backend_id = "reference"
    max_concurrency: int | None = None  # pure function, no limit

    def annotate(self, text: str) -> Annotation:
        lex = _lexicon()
        tokens = self._tokenize(text, lex)
        sentences = self._split_sentences(tokens)
        entities = self._entities(tokens, sentences, lex)
        chunks = self._chunks(tokens, sentences, lex)
        frames = self._frames(tokens, sentences, entities, chunks, lex)
        return Annotation(
            text=text,
            tokens=tuple(tokens),
            sentences=tuple(sentences),
            entities=tuple(entities),
            chunks=tuple(chunks),
            frames=tuple(frames),
        )

    # -- tokens ------------------------------------------------------------

    def _tokenize(self, text: str, lex: dict) -> list[Token]:
        pos_map: dict[str, str] = lex["pos"]
        poss = set(lex["possessive_pronouns"])
        raw: list[tuple[str, int, int]] = [
            (m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)
        ]
        tags: list[str] = []
        for word, _, _ in raw:
            tags.append(self._tag(word, pos_map))
        # Gerund/participle used as a nominal modifier: retag to adjective.
        for i in range(1, len(raw)):
            word = raw[i][0].lower()
            if tags[i] == "verb" and (word.endswith("ing") or word.endswith("ed")):
                prev_tag, prev_word = tags[i - 1], raw[i - 1][0].lower()
                if prev_tag in ("det", "adj", "num") or prev_word in poss:
                    tags[i] = "adj"
        return [
            Token(
                text=word,
                lemma=self._lemma(word, tag, lex),
                coarse_pos=tag,
                char_start=start,
                char_end=end,
            )
            for (word, start, end), tag in zip(raw, tags)
        ]

    def _tag(self, word: str, pos_map: dict[str, str]) -> str:
        lower = word.lower()
        if not any(ch.isalnum() for ch in word):
            return "punct"
        if _NUM_RE.fullmatch(word):
            return "num"
        if lower in pos_map:
            return pos_map[lower]
        if len(lower) >= 4:
            for suffix, tag in _SUFFIX_RULES:
                if lower.endswith(suffix):
                    return tag
        return "propn" if word[:1].isupper() else "noun"

    def _lemma(self, word: str, tag: str, lex: dict) -> str:
        lower = word.lower()
        lemma_map: dict[str, str] = lex["lemmas"]
        pos_map: dict[str, str] = lex["pos"]
        if lower in lemma_map:
            return lemma_map[lower]
        if tag == "verb":
            if lower.endswith("ied") and len(lower) > 4:
                return lower[:-3] + "y"
            for suffix in ("ed", "ing"):
                if lower.endswith(suffix) and len(lower) > len(suffix) + 1:
                    stem = lower[: -len(suffix)]
                    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "aeiouls":
                        return stem[:-1]
                    if pos_map.get(stem + "e") == "verb":
                        return stem + "e"
                    return stem
            if lower.endswith("ies") and len(lower) > 4:
                return lower[:-3] + "y"
            if lower.endswith("s") and not lower.endswith("ss") and len(lower) > 2:
                return lower[:-1]
        if tag in ("noun", "propn"):
            if lower.endswith("ies") and len(lower) > 4:
                return lower[:-3] + "y"
            if lower.endswith("s") and not lower.endswith("ss") and len(lower) > 2:
                return lower[:-1]
        return lower

    # -- sentences ----------------------------------------------------------

    def _split_sentences(self, tokens: list[Token]) -> list[Span]:
        sentences: list[Span] = []
        start = 0
        i = 0
        n = len(tokens)
        while i < n:
            if tokens[i].text in _TERMINALS:
                while i + 1 < n and tokens[i + 1].text in _TERMINALS:
                    i += 1
                # Closing quotes attach only when flush against the terminal.
                while (
                    i + 1 < n
                    and tokens[i + 1].text in _QUOTES
                    and tokens[i + 1].char_start == tokens[i].char_end
                ):
                    i += 1
                sentences.append((start, i + 1))
                start = i + 1
            i += 1
        if start < n:
            sentences.append((start, n))
        return sentences

    # -- entities -----------------------------------------------------------

    def _entities(
        self, tokens: list[Token], sentences: list[Span], lex: dict
    ) -> list[EntityMention]:
        function_words = set(lex["function_words"])
        time_words = set(lex["time_words"])
        location_cues = set(lex["location_cues"])

        def eligible(tok: Token) -> bool:
            return (
                tok.text[:1].isupper()
                and tok.coarse_pos not in ("punct", "num")
                and tok.text.lower() not in function_words
            )

        entities: list[EntityMention] = []
        for s_start, s_end in sentences:
            i = s_start
            while i < s_end:
                if eligible(tokens[i]):
                    j = i
                    while j + 1 < s_end and eligible(tokens[j + 1]):
                        j += 1
                    lowered = {tokens[k].text.lower() for k in range(i, j + 1)}
                    if lowered & time_words:
                        label = "time"
                    elif lowered & location_cues:
                        label = "location"
                    else:
                        label = "person"
                    entities.append(EntityMention((i, j + 1), label))
                    i = j + 1
                else:
                    i += 1
        return entities

    # -- noun chunks ----------------------------------------------------------

    def _chunks(self, tokens: list[Token], sentences: list[Span], lex: dict) -> list[NounChunk]:
        poss = set(lex["possessive_pronouns"])
        chunks: list[NounChunk] = []
        for s_start, s_end in sentences:
            i = s_start
            while i < s_end:
                start = i
                j = i
                if tokens[j].coarse_pos == "det" or (
                    tokens[j].coarse_pos == "pron" and tokens[j].text.lower() in poss
                ):
                    j += 1
                while j < s_end and tokens[j].coarse_pos in ("adj", "num"):
                    j += 1
                k = j
                while k < s_end and tokens[k].coarse_pos == "noun":
                    k += 1
                if k > j:
                    chunks.append(NounChunk((start, k), k - 1))
                    i = k
                else:
                    i = start + 1
        return chunks

    # -- predicate frames -----------------------------------------------------

    def _frames(
        self,
        tokens: list[Token],
        sentences: list[Span],
        entities: list[EntityMention],
        chunks: list[NounChunk],
        lex: dict,
    ) -> list[PredicateFrame]:
        nominal_end: dict[int, Span] = {}
        nominal_start: dict[int, Span] = {}
        for span in [c.token_span for c in chunks] + [e.token_span for e in entities]:
            nominal_end[span[1] - 1] = span
            nominal_start[span[0]] = span

        frames: list[PredicateFrame] = []
        for s_start, s_end in sentences:
            boundaries = [
                i
                for i in range(s_start, s_end)
                if tokens[i].text in _CLAUSE_PUNCT or tokens[i].text.lower() in _CLAUSE_CONJ
            ]
            consumed: set[int] = set()
            prev_subject: Span | None = None
            has_prev_frame = False
            i = s_start
            while i < s_end:
                tok = tokens[i]
                if (
                    tok.coarse_pos == "verb"
                    and i not in consumed
                    and not (i > s_start and tokens[i - 1].text.lower() == "to")
                ):
                    trigger = i
                    # Extend the verb chain over auxiliaries, adverbs, infinitives.
                    j = i + 1
                    while j < s_end:
                        if tokens[j].coarse_pos in ("verb", "adv"):
                            consumed.add(j)
                            j += 1
                        elif (
                            tokens[j].text.lower() == "to"
                            and j + 1 < s_end
                            and tokens[j + 1].coarse_pos == "verb"
                        ):
                            consumed.update((j, j + 1))
                            j += 2
                        else:
                            break

                    clause_end = next((b for b in boundaries if b > trigger), s_end)
                    pred_end = clause_end - 1
                    while pred_end > trigger and tokens[pred_end].coarse_pos == "punct":
                        pred_end -= 1

                    subject = self._find_subject(tokens, s_start, trigger, nominal_end)
                    if subject is None and has_prev_frame:
                        subject = prev_subject

                    obj: Span | None = None
                    for k in range(trigger + 1, clause_end):
                        if k in nominal_start:
                            obj = nominal_start[k]
                            break
                        if tokens[k].coarse_pos == "pron":
                            obj = (k, k + 1)
                            break

                    arguments: list[tuple[str, Span]] = []
                    if subject is not None:
                        arguments.append(("subject", subject))
                    if obj is not None:
                        arguments.append(("object", obj))
                    if pred_end > trigger:
                        arguments.append(("modifier", (trigger + 1, pred_end + 1)))
                    frames.append(PredicateFrame(trigger, tuple(arguments)))
                    prev_subject = subject
                    has_prev_frame = True
                    i = j
                else:
                    i += 1
        return frames

    def _find_subject(
        self, tokens: list[Token], s_start: int, trigger: int, nominal_end: dict[int, Span]
    ) -> Span | None:
        m = trigger - 1
        while m >= s_start and tokens[m].coarse_pos == "adv":
            m -= 1
        if m < s_start:
            return None
        if m in nominal_end:
            return nominal_end[m]
        if tokens[m].coarse_pos == "pron":
            return (m, m + 1)
        return None


class SpacyAnnotationBackend:
    """Full-strength backend mapping a spaCy pipeline onto the annotation contract.

    Requires the optional ``spacy`` dependency and an installed English model.
    """

    backend_id = "spacy"
    max_concurrency: int | None = 1  # spaCy Doc processing is serialized

    _ENT_LABELS = {
        "PERSON": "person",
        "NORP": "person",
        "GPE": "location",
        "LOC": "location",
        "FAC": "location",
        "DATE": "time",
        "TIME": "time",
        "ORG": "org",
    }
    _POS = {
        "NOUN": "noun",
        "PROPN": "propn",
        "VERB": "verb",
        "AUX": "verb",
        "ADJ": "adj",
        "ADV": "adv",
        "PRON": "pron",
        "DET": "det",
        "ADP": "adp",
        "NUM": "num",
        "PUNCT": "punct",
    }

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy  # type: ignore
        except ImportError as exc:
            raise AnnotationError(self.backend_id, f"spacy is not installed: {exc}") from exc
        try:
            self._nlp = spacy.load(model)
        except OSError as exc:
            raise AnnotationError(self.backend_id, f"model '{model}' unavailable: {exc}") from exc

    def annotate(self, text: str) -> Annotation:
        doc = self._nlp(text)
        tokens = tuple(
            Token(
                text=t.text,
                lemma=t.lemma_.lower(),
                coarse_pos=self._POS.get(t.pos_, "other"),
                char_start=t.idx,
                char_end=t.idx + len(t.text),
            )
            for t in doc
        )
        sentences = tuple((s.start, s.end) for s in doc.sents)
        entities = tuple(
            EntityMention((e.start, e.end), self._ENT_LABELS.get(e.label_, "misc"))
            for e in doc.ents
        )
        chunks = tuple(NounChunk((c.start, c.end), c.root.i) for c in doc.noun_chunks)
        frames = []
        for t in doc:
            if self._POS.get(t.pos_) != "verb":
                continue
            args: list[tuple[str, Span]] = []
            for child in t.children:
                span = (child.left_edge.i, child.right_edge.i + 1)
                if span[0] <= t.i < span[1]:
                    continue
                if child.dep_ in ("nsubj", "nsubjpass"):
                    args.append(("subject", span))
                elif child.dep_ in ("dobj", "obj", "attr", "dative"):
                    args.append(("object", span))
                elif child.dep_ in ("prep", "xcomp", "ccomp", "advmod"):
                    args.append(("modifier", span))
            frames.append(PredicateFrame(t.i, tuple(args)))
        return Annotation(text, tokens, sentences, entities, tuple(chunks), tuple(frames))


def verb_lemma(word: str) -> str:
    """Lemma of a word treated as a verb, by the reference backend's rules."""
    return ReferenceAnnotationBackend()._lemma(word, "verb", _lexicon())


def is_past_verb(word: str) -> bool:
    lower = word.lower()
    return lower in set(_lexicon()["irregular_past"]) or (
        lower.endswith("ed") and len(lower) > 3
    )


_BACKENDS: dict[str, AnnotationBackend] = {}


def register_annotation_backend(backend: AnnotationBackend) -> None:
    _BACKENDS[backend.backend_id] = backend


def get_annotation_backend(backend_id: str) -> AnnotationBackend:
    if backend_id == "reference" and backend_id not in _BACKENDS:
        register_annotation_backend(ReferenceAnnotationBackend())
    if backend_id == "spacy" and backend_id not in _BACKENDS:
        register_annotation_backend(SpacyAnnotationBackend())
    if backend_id not in _BACKENDS:
        raise KeyError(f"unknown annotation backend '{backend_id}'")
    return _BACKENDS[backend_id]


def annotate(text: str, backend: AnnotationBackend) -> Annotation:
    """Run a backend on one section text and validate the result.

    Backend failures are wrapped in :class:`AnnotationError` carrying the
    backend identity; an invalid annotation from a backend is also an error.
    """
    if not text or not text.strip():
        raise ValueError("annotate requires non-empty text")
    try:
        ann = backend.annotate(text)
    except AnnotationError:
        raise
    except Exception as exc:
        raise AnnotationError(backend.backend_id, str(exc)) from exc
    problems = validate_annotation(ann)
    if problems:
        raise AnnotationError(
            backend.backend_id, "invalid annotation: " + "; ".join(problems)
        )
    return ann
