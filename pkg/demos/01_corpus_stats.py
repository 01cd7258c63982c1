"""Load the bundled storybook corpus and reproduce its split statistics.

Usage: python demos/01_corpus_stats.py [corpus_root]
"""

import sys
from pathlib import Path

from fablegen.corpus import category_distribution, compute_stats, load_corpus

root = sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent.parent / "tests/fixtures/corpus"
corpus = load_corpus(root)

print(f"Loaded {len(corpus.stories)} books with {len(corpus.pairs)} QA pairs.\n")

for split in ("train", "validation", "test"):
    stats = compute_stats(corpus, split)
    print(f"--- {split}: {stats.book_count} book(s), {stats.qa_count} QA pairs")
    for name, d in stats.as_dict().items():
        if name in ("book_count", "qa_count"):
            continue
        print(f"  {name:<22} mean={d['mean']:>7.2f}  sd={d['sd']:>6.2f}"
              f"  min={d['min']:>4.0f}  max={d['max']:>4.0f}")
    print("  narrative elements:")
    for element, (count, fraction) in category_distribution(corpus, split).items():
        print(f"    {element.value:<22} {count:>3}  ({fraction:.3f})")
    print()
