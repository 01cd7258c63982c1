"""Compare both pipeline modes with the Rouge-L MAP@N harness.

Usage: python demos/05_evaluation.py
"""

from pathlib import Path

from fablegen.corpus import load_corpus
from fablegen.evaluation import evaluate_systems
from fablegen.pipeline import PipelineConfig, run_pipeline

corpus = load_corpus(Path(__file__).parent.parent / "tests/fixtures/corpus")

outputs = {}
for tag, config in {
    "three_stage": PipelineConfig(top_n=10),
    "two_step": PipelineConfig(
        mode="two_step_baseline", qg_backend_id="template_question_first", top_n=10
    ),
}.items():
    pairs = []
    for story in corpus.stories_in_split("test"):
        result = run_pipeline(story, config)
        for index in sorted(result.pairs):
            pairs.extend(result.pairs[index])
    outputs[tag] = pairs

report = evaluate_systems(corpus, "test", outputs, ns=[1, 3, 5, 10])
print(report.to_text_table())
print()
worst = sorted(report.diagnostics, key=lambda d: d["best_score"])[:3]
print("hardest gold pairs (lowest best-match score at N=10):")
for diag in worst:
    print(f"  [{diag['system']}] {diag['gold_question']}  best={diag['best_score']:.3f}")
