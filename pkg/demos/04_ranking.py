"""Train the classification ranker on gold-vs-generated pairs and select top-N.

Usage: python demos/04_ranking.py
"""

from pathlib import Path

from fablegen.corpus import load_corpus
from fablegen.pipeline import PipelineConfig, run_qag
from fablegen.ranker import (
    RankerInputLayout,
    build_ranking_dataset,
    score,
    select_top_n,
    train_ranker,
)

corpus = load_corpus(Path(__file__).parent.parent / "tests/fixtures/corpus")
layout = RankerInputLayout()

# Stage 1-2 output provides the negatives; expert pairs are the positives.
story = corpus.story("the-junket-tale")
generated = run_qag(story, PipelineConfig(top_n=5)).all_pairs()
gold = [p for p in corpus.pairs if p.story_id == story.story_id]
examples = build_ranking_dataset(corpus, gold, generated)
print(f"ranking dataset: {len(examples)} examples "
      f"({sum(e.label for e in examples)} positive)")

ranker, metrics = train_ranker(examples, layout)
print("held-out metrics:", {k: round(v, 3) for k, v in metrics.items()})

section = story.section(1)
print("\nscores for three probe pairs:")
for q, a in [
    ("What did the three young men ask for?", "a junket"),
    ("Why did they want a junket?", "they wanted to get something to eat"),
    ("What is the capital of France?", "Paris"),
]:
    s = score(section.text, q, a, ranker, layout)
    print(f"  {s:.3f}  Q: {q}  A: {a}")

print("\ntop-2 of the pipeline's section-1 pairs:")
for pair in select_top_n(run_qag(story, PipelineConfig(top_n=5)).pairs[1], 2):
    print(f"  {pair.score:.3f}  Q: {pair.question}  A: {pair.answer}")
