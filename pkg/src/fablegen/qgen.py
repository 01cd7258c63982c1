"""Question generation behind a backend contract.

Three backends ship with the package:

* ``template`` — a total, deterministic rule backend keyed on candidate-answer
  provenance. It lets the whole pipeline, ranking, and evaluation stack run
  and be tested without any model weights.
* ``template_question_first`` — the section-only variant used by the 2-step
  baseline: questions first, answers in a second pass.
* ``tiny_seq2seq`` — a small trainable encoder-decoder (requires torch) wired
  through the same fine-tuning harness a full-scale model would use.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

from .answer_extract import CandidateAnswer
from .corpus import Corpus, NarrativeElement, Split
from .errors import GenerationError, LearnedBackendUnavailableError
from .evaluation import tokenize_for_rouge
from .lingann import (
    Annotation,
    ReferenceAnnotationBackend,
    is_past_verb,
    verb_lemma,
)

SEP_TOKEN = "<sep>"


@dataclass(frozen=True)
class QGRequest:
    section_text: str
    answer_text: str
    # Provenance lets the rule backend pick a targeted template; learned
    # backends ignore it.
    candidate: CandidateAnswer | None = None

    def __post_init__(self):
        if not self.section_text.strip() or not self.answer_text.strip():
            raise ValueError("QGRequest requires non-empty section and answer text")


@dataclass(frozen=True)
class GenerationConfig:
    backend_id: str = "template"
    max_output_tokens: int = 64
    decoding: str = "greedy"  # greedy | beam
    beam_width: int = 1
    seed: int = 13

    def __post_init__(self):
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")
        if self.decoding not in ("greedy", "beam"):
            raise ValueError(f"unknown decoding mode {self.decoding!r}")
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")


@dataclass(frozen=True)
class FinetuneConfig:
    # Reference fine-tuning configuration for a full-scale backbone.
    learning_rate: float = 5e-6
    batch_size: int = 1
    epochs: int = 3
    train_source: str = "fairytale_only"  # fairytale_only | external_only | both

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.train_source not in ("fairytale_only", "external_only", "both"):
            raise ValueError(f"unknown train_source {self.train_source!r}")


@runtime_checkable
class QGBackend(Protocol):
    backend_id: str
    max_concurrency: int | None

    def generate_question(self, request: QGRequest, config: GenerationConfig) -> str: ...


# ---------------------------------------------------------------------------
# Template backend


class TemplateQGBackend:
    """Deterministic template table over candidate source and target elements.

    When several templates apply to a candidate the choice cycles by
    ``rank_hint`` modulo the number of applicable templates, so a section
    exercises multiple question types. Tense (is/was, does/did) follows the
    sentence holding the candidate's first provenance span.
    """

    backend_id = "template"
    max_concurrency: int | None = None  # pure

    def __init__(self):
        self._annotator = ReferenceAnnotationBackend()

    # -- template selection --------------------------------------------------

    def template_id(self, candidate: CandidateAnswer | None) -> str:
        if candidate is None:
            return "generic"
        if candidate.source in ("entity", "noun_chunk"):
            targets = candidate.target_elements
            if targets == {NarrativeElement.FEELING}:
                return "how_feel"
            if targets == {NarrativeElement.CHARACTER}:
                return "who_is"
            if targets == {NarrativeElement.SETTING}:
                return "where_be"
            cycle = ("who_is", "where_be")
            return cycle[candidate.rank_hint % len(cycle)]
        if candidate.subject_text:
            cycle = ("what_do", "why_vp")
            return cycle[candidate.rank_hint % len(cycle)]
        return "what_happened"

    def generate_question(self, request: QGRequest, config: GenerationConfig) -> str:
        candidate = request.candidate
        template = self.template_id(candidate)
        past = self._is_past_context(request.section_text, candidate)
        text = candidate.text if candidate else request.answer_text

        if template == "generic" or template == "what_happened":
            return "What happens in this part of the story?"
        if template == "who_is":
            return f"Who is {text}?"
        if template == "where_be":
            return f"Where {'was' if past else 'is'} {text}?"
        if template == "how_feel":
            return f"How did {text} feel?"
        if template == "what_do":
            subject = candidate.subject_text or "the story"
            if past:
                aux = "did"
            elif subject.lower() in ("i", "you", "we", "they"):
                aux = "do"
            else:
                aux = "does"
            return f"What {aux} {subject} do?"
        if template == "why_vp":
            subject = candidate.subject_text or "the story"
            vp = self._verb_phrase(candidate)
            return f"Why did {subject} {vp}?"
        raise GenerationError(f"no template for candidate {candidate!r}")

    _AUXILIARIES = frozenset(
        "shall will would can could may might must do does did had has have".split()
    )

    def _verb_phrase(self, candidate: CandidateAnswer) -> str:
        vp = candidate.text
        subject = candidate.subject_text or ""
        if subject and vp.lower().startswith(subject.lower() + " "):
            vp = vp[len(subject) + 1 :]
        words = vp.split()
        # "Why did S ..." already carries the auxiliary; drop a leading one.
        while len(words) > 1 and words[0].lower() in self._AUXILIARIES:
            words = words[1:]
        if words:
            words[0] = verb_lemma(words[0])
        return " ".join(words)

    def _is_past_context(self, section_text: str, candidate: CandidateAnswer | None) -> bool:
        ann = self._annotator.annotate(section_text)
        span = None
        if candidate is not None and candidate.provenance_spans:
            first = candidate.provenance_spans[0][0]
            if 0 <= first < len(ann.tokens):
                span = ann.sentence_of(first)
        tokens = ann.tokens[span[0] : span[1]] if span else ann.tokens
        return any(t.coarse_pos == "verb" and is_past_verb(t.text) for t in tokens)

    # -- answers for the 2-step baseline --------------------------------------

    def generate_answer(self, section_text: str, question: str, config: GenerationConfig) -> str:
        """Echo the longest noun chunk of the sentence that best overlaps the question.

        Chunks whose text already occurs inside the question are skipped so the
        answer adds information beyond the question's own words; if every chunk
        is skipped the longest chunk wins, and a chunkless sentence answers
        with its full text.
        """
        ann = self._annotator.annotate(section_text)
        question_tokens = set(tokenize_for_rouge(question))

        best_span = None
        best_overlap = -1
        for span in ann.sentences:
            words = {
                t.text.lower() for t in ann.tokens[span[0] : span[1]] if t.coarse_pos != "punct"
            }
            overlap = len(words & question_tokens)
            if overlap > best_overlap:
                best_overlap = overlap
                best_span = span
        if best_span is None:
            raise GenerationError("section has no sentences")

        question_lower = question.lower()
        in_sentence = [
            c for c in ann.chunks if best_span[0] <= c.token_span[0] and c.token_span[1] <= best_span[1]
        ]
        fresh = [
            c for c in in_sentence if ann.span_text(c.token_span).lower() not in question_lower
        ]
        pool = fresh or in_sentence
        if pool:
            chunk = max(pool, key=lambda c: c.token_span[1] - c.token_span[0])
            return ann.span_text(chunk.token_span)
        return ann.span_text(best_span)


class TemplateQuestionFirstBackend:
    """Section-only question generation for the 2-step baseline: one question
    per sentence, in document order."""

    backend_id = "template_question_first"
    max_concurrency: int | None = None

    def __init__(self):
        self._annotator = ReferenceAnnotationBackend()

    def generate_questions(
        self, section_text: str, max_questions: int, config: GenerationConfig | None = None
    ) -> list[str]:
        if max_questions < 1:
            return []
        ann = self._annotator.annotate(section_text)
        questions: list[str] = []
        for span in ann.sentences:
            questions.append(self._question_for_sentence(ann, span))
            if len(questions) >= max_questions:
                break
        return questions

    def _question_for_sentence(self, ann: Annotation, span) -> str:
        past = any(
            t.coarse_pos == "verb" and is_past_verb(t.text)
            for t in ann.tokens[span[0] : span[1]]
        )
        for frame in ann.frames:
            if span[0] <= frame.trigger_token_idx < span[1]:
                subject = frame.argument("subject")
                if subject is not None:
                    name = ann.span_text(subject)
                    return f"What {'did' if past else 'does'} {name} do?"
        for ent in ann.entities:
            if span[0] <= ent.token_span[0] and ent.token_span[1] <= span[1]:
                return f"Who is {ann.span_text(ent.token_span)}?"
        for chunk in ann.chunks:
            if span[0] <= chunk.token_span[0] and chunk.token_span[1] <= span[1]:
                return f"What is {ann.span_text(chunk.token_span)}?"
        return "What happens in this part of the story?"


# ---------------------------------------------------------------------------
# Operation wrappers


def generate_question(
    request: QGRequest, backend: QGBackend, config: GenerationConfig = GenerationConfig()
) -> str:
    """Generate one question; always a single line ending in '?'."""
    try:
        raw = backend.generate_question(request, config)
    except (GenerationError, LearnedBackendUnavailableError):
        raise
    except Exception as exc:
        raise GenerationError(f"backend '{backend.backend_id}' failed: {exc}") from exc
    question = " ".join(raw.split())
    if not question:
        raise GenerationError(f"backend '{backend.backend_id}' produced empty output")
    if not question.endswith("?"):
        question += "?"
    return question


def generate_answer(
    section_text: str,
    question: str,
    backend,
    config: GenerationConfig = GenerationConfig(),
) -> str:
    if not section_text.strip() or not question.strip():
        raise ValueError("generate_answer requires non-empty section and question")
    try:
        raw = backend.generate_answer(section_text, question, config)
    except (GenerationError, LearnedBackendUnavailableError):
        raise
    except Exception as exc:
        raise GenerationError(f"backend '{backend.backend_id}' failed: {exc}") from exc
    answer = " ".join(raw.split())
    if not answer:
        raise GenerationError(f"backend '{backend.backend_id}' produced empty answer")
    return answer


# ---------------------------------------------------------------------------
# Training pairs


def build_qg_training_pairs(
    corpus: Corpus, split: Split | str, direction: str = "answer_to_question"
) -> list[tuple[str, str]]:
    """Serialize a split's QA pairs for fine-tuning.

    ``answer_to_question`` inputs are ``"<answer> <sep> <section>"`` with the
    gold question as target; ``question_to_answer`` swaps the roles. A pair
    referencing several sections uses their concatenated text.
    """
    if direction not in ("answer_to_question", "question_to_answer"):
        raise ValueError(f"unknown direction {direction!r}")
    split = Split.parse(split) if isinstance(split, str) else split
    out: list[tuple[str, str]] = []
    for pair in corpus.pairs_in_split(split):
        section_text = corpus.section_text(pair.story_id, pair.section_indices)
        if direction == "answer_to_question":
            out.append((f"{pair.answer} {SEP_TOKEN} {section_text}", pair.question))
        else:
            out.append((f"{pair.question} {SEP_TOKEN} {section_text}", pair.answer))
    return out


def invert_training_pair(
    input_text: str, target_text: str, direction: str
) -> tuple[str, str, str]:
    """Recover (section, question, answer) from one serialized training pair."""
    head, sep, section = input_text.partition(f" {SEP_TOKEN} ")
    if not sep:
        raise ValueError("input text does not contain the separator convention")
    if direction == "answer_to_question":
        return section, target_text, head
    if direction == "question_to_answer":
        return section, head, target_text
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# Learned backend + fine-tuning harness


def _require_torch():
    try:
        import torch  # noqa: F401

        return torch
    except Exception as exc:  # pragma: no cover - environment dependent
        raise LearnedBackendUnavailableError(
            f"learned backend unavailable: torch could not be imported ({exc})"
        ) from exc


class TinySeq2SeqBackend:
    """Word-level GRU encoder-decoder. Small enough to fine-tune on a desk.

    Exists to exercise the fine-tuning harness and the learned-backend code
    paths; a full-scale pretrained backbone plugs in behind the same contract.
    """

    backend_id = "tiny_seq2seq"
    max_concurrency: int | None = 1

    PAD, BOS, EOS, UNK = 0, 1, 2, 3

    def __init__(self, vocab: dict[str, int], embed_dim: int = 32, hidden_dim: int = 64, seed: int = 13):
        torch = _require_torch()
        self.vocab = vocab
        self.inverse = {i: w for w, i in vocab.items()}
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        torch.manual_seed(seed)
        size = len(vocab)
        self._embed = torch.nn.Embedding(size, embed_dim, padding_idx=self.PAD)
        self._encoder = torch.nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self._decoder = torch.nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self._out = torch.nn.Linear(hidden_dim, size)

    @classmethod
    def build_vocab(cls, pairs: Sequence[tuple[str, str]]) -> dict[str, int]:
        vocab = {"<pad>": cls.PAD, "<bos>": cls.BOS, "<eos>": cls.EOS, "<unk>": cls.UNK}
        for source, target in pairs:
            for word in source.split() + target.split():
                vocab.setdefault(word, len(vocab))
        return vocab

    def _encode(self, text: str) -> list[int]:
        return [self.vocab.get(w, self.UNK) for w in text.split()]

    def _parameters(self):
        for module in (self._embed, self._encoder, self._decoder, self._out):
            yield from module.parameters()

    def _loss(self, torch, source: str, target: str):
        src = torch.tensor([self._encode(source)], dtype=torch.long)
        tgt = [self.BOS] + self._encode(target) + [self.EOS]
        tgt_in = torch.tensor([tgt[:-1]], dtype=torch.long)
        tgt_out = torch.tensor([tgt[1:]], dtype=torch.long)
        _, state = self._encoder(self._embed(src))
        hidden, _ = self._decoder(self._embed(tgt_in), state)
        logits = self._out(hidden)
        return torch.nn.functional.cross_entropy(
            logits.view(-1, logits.size(-1)), tgt_out.view(-1)
        )

    def train_epochs(
        self, pairs: Sequence[tuple[str, str]], config: FinetuneConfig, seed: int = 13
    ) -> list[float]:
        torch = _require_torch()
        optimizer = torch.optim.Adam(list(self._parameters()), lr=config.learning_rate)
        rng = random.Random(seed)
        losses: list[float] = []
        order = list(range(len(pairs)))
        for _ in range(config.epochs):
            rng.shuffle(order)
            total = 0.0
            optimizer.zero_grad()
            for step, idx in enumerate(order, start=1):
                source, target = pairs[idx]
                loss = self._loss(torch, source, target)
                loss.backward()
                total += float(loss.detach())
                if step % config.batch_size == 0 or step == len(order):
                    optimizer.step()
                    optimizer.zero_grad()
            losses.append(total / len(order))
        return losses

    def _generate(self, source: str, config: GenerationConfig) -> str:
        if config.decoding == "beam" and config.beam_width > 1:
            return self._beam_generate(source, config)
        torch = _require_torch()
        with torch.no_grad():
            src = torch.tensor([self._encode(source)], dtype=torch.long)
            _, state = self._encoder(self._embed(src))
            words: list[str] = []
            token = self.BOS
            for _ in range(config.max_output_tokens):
                inp = torch.tensor([[token]], dtype=torch.long)
                hidden, state = self._decoder(self._embed(inp), state)
                logits = self._out(hidden[0, -1])
                token = int(torch.argmax(logits))
                if token == self.EOS:
                    break
                words.append(self.inverse.get(token, "<unk>"))
        return " ".join(words)

    def _beam_generate(self, source: str, config: GenerationConfig) -> str:
        torch = _require_torch()
        with torch.no_grad():
            src = torch.tensor([self._encode(source)], dtype=torch.long)
            _, state = self._encoder(self._embed(src))
            # beams: (cumulative negative log-prob, token list, decoder state, finished)
            beams = [(0.0, [self.BOS], state, False)]
            for _ in range(config.max_output_tokens):
                candidates = []
                for cost, tokens, beam_state, finished in beams:
                    if finished:
                        candidates.append((cost, tokens, beam_state, True))
                        continue
                    inp = torch.tensor([[tokens[-1]]], dtype=torch.long)
                    hidden, next_state = self._decoder(self._embed(inp), beam_state)
                    log_probs = torch.log_softmax(self._out(hidden[0, -1]), dim=-1)
                    top = torch.topk(log_probs, min(config.beam_width, log_probs.size(0)))
                    for log_prob, token in zip(top.values, top.indices):
                        t = int(token)
                        candidates.append(
                            (cost - float(log_prob), tokens + [t], next_state, t == self.EOS)
                        )
                # token-list tie-break keeps the search deterministic
                candidates.sort(key=lambda c: (c[0], c[1]))
                beams = candidates[: config.beam_width]
                if all(finished for _, _, _, finished in beams):
                    break
            _, tokens, _, _ = min(beams, key=lambda c: (c[0], c[1]))
        words = [self.inverse.get(t, "<unk>") for t in tokens[1:] if t != self.EOS]
        return " ".join(words)

    def generate_question(self, request: QGRequest, config: GenerationConfig) -> str:
        return self._generate(f"{request.answer_text} {SEP_TOKEN} {request.section_text}", config)

    def generate_answer(self, section_text: str, question: str, config: GenerationConfig) -> str:
        return self._generate(f"{question} {SEP_TOKEN} {section_text}", config)


def finetune(
    backend_spec: str | dict,
    pairs: Sequence[tuple[str, str]],
    config: FinetuneConfig,
    metrics_path: str | Path | None = None,
) -> tuple[TinySeq2SeqBackend, list[float]]:
    """Fine-tune a learned backend on (input, target) pairs.

    Returns the trained handle and the per-epoch loss curve. Raises
    :class:`LearnedBackendUnavailableError` when the learned stack cannot run;
    there is never a silent fallback to the template backend.
    """
    if not pairs:
        raise ValueError("finetune requires a non-empty pair list")
    spec = {"type": backend_spec} if isinstance(backend_spec, str) else dict(backend_spec)
    if spec.get("type") != "tiny_seq2seq":
        raise LearnedBackendUnavailableError(
            f"learned backend unavailable: unknown backend spec {spec.get('type')!r}"
        )
    backend = TinySeq2SeqBackend(
        vocab=TinySeq2SeqBackend.build_vocab(pairs),
        embed_dim=int(spec.get("embed_dim", 32)),
        hidden_dim=int(spec.get("hidden_dim", 64)),
        seed=int(spec.get("seed", 13)),
    )
    losses = backend.train_epochs(pairs, config, seed=int(spec.get("seed", 13)))
    if metrics_path is not None:
        payload = {
            "backend_id": backend.backend_id,
            "config": {
                "learning_rate": config.learning_rate,
                "batch_size": config.batch_size,
                "epochs": config.epochs,
                "train_source": config.train_source,
            },
            "pair_count": len(pairs),
            "epoch_losses": losses,
        }
        Path(metrics_path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return backend, losses


def save_qg_backend(backend: TinySeq2SeqBackend, dir_path: str | Path) -> None:
    """Persist a trained handle: manifest + vocabulary + weights."""
    torch = _require_torch()
    path = Path(dir_path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "type": "tiny_seq2seq",
        "embed_dim": backend.embed_dim,
        "hidden_dim": backend.hidden_dim,
    }
    (path / "qg_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (path / "vocab.json").write_text(
        json.dumps(backend.vocab, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    torch.save(
        {
            "embed": backend._embed.state_dict(),
            "encoder": backend._encoder.state_dict(),
            "decoder": backend._decoder.state_dict(),
            "out": backend._out.state_dict(),
        },
        path / "weights.pt",
    )


def load_qg_backend(dir_path: str | Path) -> TinySeq2SeqBackend:
    torch = _require_torch()
    path = Path(dir_path)
    manifest = json.loads((path / "qg_manifest.json").read_text(encoding="utf-8"))
    if manifest.get("type") != "tiny_seq2seq":
        raise LearnedBackendUnavailableError(
            f"learned backend unavailable: unknown saved backend {manifest.get('type')!r}"
        )
    vocab = json.loads((path / "vocab.json").read_text(encoding="utf-8"))
    backend = TinySeq2SeqBackend(
        vocab=vocab,
        embed_dim=int(manifest["embed_dim"]),
        hidden_dim=int(manifest["hidden_dim"]),
    )
    weights = torch.load(path / "weights.pt", weights_only=True)
    backend._embed.load_state_dict(weights["embed"])
    backend._encoder.load_state_dict(weights["encoder"])
    backend._decoder.load_state_dict(weights["decoder"])
    backend._out.load_state_dict(weights["out"])
    return backend


# ---------------------------------------------------------------------------
# Registry

_QG_BACKENDS: dict[str, object] = {}


def register_qg_backend(backend) -> None:
    _QG_BACKENDS[backend.backend_id] = backend


def get_qg_backend(backend_id: str):
    """Resolve a backend by id; a directory holding a saved handle also works."""
    if backend_id == "template" and backend_id not in _QG_BACKENDS:
        register_qg_backend(TemplateQGBackend())
    if backend_id == "template_question_first" and backend_id not in _QG_BACKENDS:
        register_qg_backend(TemplateQuestionFirstBackend())
    if backend_id not in _QG_BACKENDS:
        path = Path(backend_id)
        if path.is_dir() and (path / "qg_manifest.json").exists():
            return load_qg_backend(path)
        raise KeyError(f"unknown QG backend '{backend_id}'")
    return _QG_BACKENDS[backend_id]
