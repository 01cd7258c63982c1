"""Simulate a child's reading session against the storyteller session store.

Usage: python demos/06_interactive_session.py
"""

import tempfile
from pathlib import Path

from fablegen.corpus import load_corpus
from fablegen.pipeline import PipelineConfig
from fablegen.sessions import SessionStore

corpus = load_corpus(Path(__file__).parent.parent / "tests/fixtures/corpus")

with tempfile.TemporaryDirectory() as data_dir:
    store = SessionStore(corpus, PipelineConfig(top_n=3), data_dir)
    session = store.create("the-snow-child")
    sid = session.session_id
    print(f"session {sid} reading '{corpus.story(session.story_id).title}'\n")

    scripted_answers = iter([
        "lived in a small village by the forest",
        "they had no children",
        "a little child of snow",
        "great joy",
        "she melted away",
    ])
    while True:
        payload = store.next_question(sid)
        if payload["type"] == "advance_section":
            print(f"== advancing to section {payload['section_index']} ==\n")
            continue
        if payload["type"] == "session_complete":
            print("== the story is finished! ==")
            break
        prefix = "follow-up" if payload["is_followup"] else "question "
        print(f"[{prefix}] {payload['question']}")
        answer = next(scripted_answers, "i do not know")
        verdict, _ = store.answer(sid, payload["question_id"], answer)
        print(f"  child: {answer}")
        print(f"  -> {verdict.feedback_hint} (similarity {verdict.similarity:.2f})\n")

    progress = store.progress(sid)
    print("parent dashboard:")
    for row in progress["sections"]:
        print(f"  section {row['section_index']}: answered {row['answered']}"
              f"/{row['planned']}, correct {row['correct']}")
