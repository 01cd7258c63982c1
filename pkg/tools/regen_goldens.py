"""Regenerate the deterministic golden files under tests/golden/.

Covers the annotation goldens, the candidate-extraction lists, and both
pipeline JSONL files. The fixture manifest and the API transcript have their
own tools (build_fixture_manifest.py, record_api_transcript.py).

Run from the repository root after an intentional rule change, then review
the git diff:

    python tools/regen_goldens.py
"""

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from fablegen.answer_extract import extract_candidate_answers
from fablegen.corpus import load_corpus
from fablegen.lingann import ReferenceAnnotationBackend, annotate
from fablegen.pipeline import PipelineConfig, run_pipeline

GOLDEN = REPO / "tests" / "golden"

ANNOTATION_CASES = {
    "maie_sighed": "Maie sighed.",
    "the_cow": "the cow",
    "ali_baba": "Ali Baba goes to the cave.",
    "junket_sentence": (
        "'we ask you, bring us a junket, good mother,' cried the three young men to Maie."
    ),
}

CANDIDATE_SECTIONS = [
    ("the-junket-tale", 1),
    ("the-junket-tale", 2),
    ("ali-baba-and-the-cave", 1),
    ("ali-baba-and-the-cave", 2),
    ("the-snow-child", 1),
]


def main():
    backend = ReferenceAnnotationBackend()
    corpus = load_corpus(REPO / "tests" / "fixtures" / "corpus")

    for name, text in ANNOTATION_CASES.items():
        (GOLDEN / f"{name}.ann.json").write_text(
            annotate(text, backend).to_json(), encoding="utf-8"
        )
        print(f"wrote {name}.ann.json")

    payload = {}
    for story_id, index in CANDIDATE_SECTIONS:
        section = corpus.story(story_id).section(index)
        payload[f"{story_id}:{index}"] = [
            c.to_dict() for c in extract_candidate_answers(section, backend)
        ]
    (GOLDEN / "candidates.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    print("wrote candidates.json")

    runs = {
        "pipeline_three_stage.jsonl": ("three_stage", PipelineConfig(top_n=3)),
        "pipeline_two_step.jsonl": (
            "two_step_baseline",
            PipelineConfig(
                mode="two_step_baseline",
                qg_backend_id="template_question_first",
                top_n=3,
            ),
        ),
    }
    for filename, (tag, config) in runs.items():
        lines = []
        for story in corpus.stories:
            result = run_pipeline(story, config)
            assert not result.errors, result.errors
            for index in sorted(result.pairs):
                for pair in result.pairs[index]:
                    record = pair.to_dict()
                    record["system_tag"] = tag
                    record.pop("provenance", None)
                    lines.append(json.dumps(record, ensure_ascii=False))
        (GOLDEN / filename).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {filename}")


if __name__ == "__main__":
    main()
