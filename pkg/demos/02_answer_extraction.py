"""Walk one storybook section through annotation and candidate-answer extraction.

Usage: python demos/02_answer_extraction.py
"""

from pathlib import Path

from fablegen.answer_extract import extract_candidate_answers
from fablegen.corpus import load_corpus
from fablegen.lingann import ReferenceAnnotationBackend, annotate

corpus = load_corpus(Path(__file__).parent.parent / "tests/fixtures/corpus")
section = corpus.story("the-junket-tale").section(1)
backend = ReferenceAnnotationBackend()

print("SECTION TEXT\n------------")
print(section.text, "\n")

ann = annotate(section.text, backend)
print(f"{len(ann.tokens)} tokens, {len(ann.sentences)} sentences")
print("entities:", [(ann.span_text(e.token_span), e.label) for e in ann.entities])
print("chunks:  ", [ann.span_text(c.token_span) for c in ann.chunks][:8], "...")
print("frames:  ", [
    (ann.tokens[f.trigger_token_idx].text,
     ann.span_text(f.argument("subject")) if f.argument("subject") else None)
    for f in ann.frames
][:6], "...\n")

print("CANDIDATE ANSWERS (document order)\n----------------------------------")
for cand in extract_candidate_answers(section, backend):
    targets = ",".join(sorted(e.value for e in cand.target_elements))
    print(f"  [{cand.source:<10}] {cand.text!r:<60} -> {targets}")
