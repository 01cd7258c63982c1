"""Generate answer-conditioned questions with the template backend, and train
the tiny learned backend on a toy copy task to show the fine-tuning harness.

Usage: python demos/03_question_generation.py
"""

from pathlib import Path

from fablegen.answer_extract import extract_candidate_answers
from fablegen.corpus import load_corpus
from fablegen.lingann import ReferenceAnnotationBackend
from fablegen.qgen import (
    FinetuneConfig,
    GenerationConfig,
    QGRequest,
    TemplateQGBackend,
    build_qg_training_pairs,
    finetune,
    generate_question,
)

corpus = load_corpus(Path(__file__).parent.parent / "tests/fixtures/corpus")
section = corpus.story("ali-baba-and-the-cave").section(2)
backend = TemplateQGBackend()
config = GenerationConfig()

print("TEMPLATE BACKEND\n----------------")
for cand in extract_candidate_answers(section, ReferenceAnnotationBackend())[:8]:
    question = generate_question(QGRequest(section.text, cand.text, candidate=cand),
                                 backend, config)
    print(f"  A: {cand.text!r}")
    print(f"  Q: {question}\n")

print("TRAINING PAIR SERIALIZATION\n---------------------------")
pairs = build_qg_training_pairs(corpus, "train", "answer_to_question")
print(f"  {len(pairs)} pairs; first input:\n    {pairs[0][0][:90]}...")
print(f"  first target: {pairs[0][1]}\n")

print("FINE-TUNING HARNESS (tiny seq2seq on a 10-example copy task)\n----------")
try:
    copy_pairs = [(s, s) for s in (
        "the cat sat", "a dog ran fast", "birds sing in spring", "the lake froze over",
        "she found a red box", "he walked home slowly", "rain fell all night",
        "the bread was warm", "a fox crossed the road", "stars filled the sky",
    )]
    _, losses = finetune("tiny_seq2seq", copy_pairs,
                         FinetuneConfig(learning_rate=0.05, batch_size=1, epochs=3))
    print("  per-epoch losses:", [round(l, 3) for l in losses])
except Exception as exc:  # LearnedBackendUnavailableError when torch missing
    print(f"  skipped: {exc}")
