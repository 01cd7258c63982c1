"""Build the expected-values manifest for the bundled fixture corpus.

Reads the raw story JSON files directly and recomputes every statistic with
its own tokenizer and formulas, independent of the fablegen package, so the
manifest can serve as an oracle for corpus.compute_stats and
corpus.category_distribution.

Run from the repository root:

    python tools/build_fixture_manifest.py
"""

import json
import math
import re
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "corpus"

_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~‘’“”—–…"
_WS = re.compile(r"\s+")


def tokens(text):
    out = []
    for raw in _WS.split(text.lower().strip()):
        word = raw.strip(_PUNCT)
        if word:
            out.append(word)
    return out


def dist(values):
    if not values:
        return {"mean": 0.0, "sd": 0.0, "min": 0, "max": 0}
    n = len(values)
    mean = sum(values) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / n)  # population sd
    return {"mean": mean, "sd": sd, "min": min(values), "max": max(values)}


def main():
    stories = []
    for path in sorted((ROOT / "stories").glob("*.json")):
        stories.append(json.loads(path.read_text(encoding="utf-8")))

    manifest = {"book_total": len(stories), "qa_total": 0, "splits": {}}
    by_split = {}
    for story in stories:
        by_split.setdefault(story["split"], []).append(story)
        manifest["qa_total"] += len(story["qa_pairs"])

    elements = ["character", "setting", "feeling", "action",
                "causal_relationship", "outcome_resolution", "prediction"]

    for split, split_stories in sorted(by_split.items()):
        sections_per_story = [float(len(s["sections"])) for s in split_stories]
        tokens_per_section, tokens_per_story = [], []
        for story in split_stories:
            counts = [len(tokens(sec["text"])) for sec in story["sections"]]
            tokens_per_section.extend(float(c) for c in counts)
            tokens_per_story.append(float(sum(counts)))

        pairs = [p for s in split_stories for p in s["qa_pairs"]]
        q_per_story = {s["story_id"]: 0 for s in split_stories}
        q_per_section = {
            (s["story_id"], sec["index"]): 0 for s in split_stories for sec in s["sections"]
        }
        counts = {e: 0 for e in elements}
        for pair in pairs:
            q_per_story[pair["story_id"]] += 1
            for idx in pair["section_indices"]:
                q_per_section[(pair["story_id"], idx)] += 1
            counts[pair["element"]] += 1

        manifest["splits"][split] = {
            "book_count": len(split_stories),
            "qa_count": len(pairs),
            "stats": {
                "sections_per_story": dist(sections_per_story),
                "tokens_per_story": dist(tokens_per_story),
                "tokens_per_section": dist(tokens_per_section),
                "questions_per_story": dist([float(v) for v in q_per_story.values()]),
                "questions_per_section": dist([float(v) for v in q_per_section.values()]),
                "tokens_per_question": dist([float(len(tokens(p["question"]))) for p in pairs]),
                "tokens_per_answer": dist([float(len(tokens(p["answer"]))) for p in pairs]),
            },
            "categories": {
                e: {"count": counts[e], "fraction": counts[e] / len(pairs) if pairs else 0.0}
                for e in elements
            },
            "training_pair_count": len(pairs),
        }

    out = ROOT / "expected_manifest.json"
    out.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
