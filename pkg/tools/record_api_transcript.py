"""Record the golden HTTP transcript for the API contract test.

Drives a fresh in-process server over the fixture corpus through a scripted
session, normalizes volatile values (session ids, timestamps), and writes
tests/golden/api_transcript.json. The contract test replays the same script
against a fresh server and requires byte-identical normalized responses.

Run from the repository root:

    python tools/record_api_transcript.py
"""

import json
import re
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from fastapi.testclient import TestClient

from fablegen.corpus import load_corpus
from fablegen.pipeline import PipelineConfig
from fablegen.service import create_app

_TS = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}[^\"]*")


def normalize(payload, session_ids):
    text = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    for sid in session_ids:
        text = text.replace(sid, "<SESSION_ID>")
    text = _TS.sub("<TS>", text)
    return json.loads(text)


SCRIPT = [
    {"method": "GET", "path": "/v1/books"},
    {"method": "GET", "path": "/v1/books/the-junket-tale/sections/1"},
    {"method": "GET", "path": "/v1/books/no-such-book/sections/1"},
    {"method": "POST", "path": "/v1/sessions", "json": {"story_id": "the-junket-tale"}},
    {"method": "GET", "path": "/v1/sessions/{sid}/next"},
    {
        "method": "POST",
        "path": "/v1/sessions/{sid}/answer",
        "json": {
            "question_id": "{qid}",
            "user_answer": "we cried the three young men to Maie",
            "idempotency_key": "key-1",
        },
    },
    {
        "method": "POST",
        "path": "/v1/sessions/{sid}/answer",
        "json": {
            "question_id": "{qid}",
            "user_answer": "we cried the three young men to Maie",
            "idempotency_key": "key-1",
        },
    },
    {"method": "GET", "path": "/v1/sessions/{sid}/next"},
    {
        "method": "POST",
        "path": "/v1/sessions/{sid}/answer",
        "json": {"question_id": "{qid}", "user_answer": "no idea", "idempotency_key": "key-2"},
    },
    {"method": "GET", "path": "/v1/sessions/{sid}/next"},
    {"method": "GET", "path": "/v1/sessions/{sid}/progress"},
    {"method": "POST", "path": "/v1/books/ali-baba-and-the-cave/qag", "params": {"top_n": 2}},
    {"method": "GET", "path": "/v1/sessions/doesnotexist/next"},
]


def drive(client):
    session_ids = []
    last_question_id = None
    steps = []
    for step in SCRIPT:
        path = step["path"].replace("{sid}", session_ids[-1] if session_ids else "")
        body = step.get("json")
        if body is not None:
            body = {
                k: (v.replace("{qid}", last_question_id or "") if isinstance(v, str) else v)
                for k, v in body.items()
            }
        response = client.request(
            step["method"], path, json=body, params=step.get("params")
        )
        payload = response.json()
        if step["path"] == "/v1/sessions" and response.status_code == 201:
            session_ids.append(payload["session_id"])
        if isinstance(payload, dict) and payload.get("type") == "question":
            last_question_id = payload["question_id"]
        # Question ids are deterministic (story:section:rank), so requests are
        # recorded with the {sid} placeholder only; everything else replays as-is.
        request_record = {"method": step["method"], "path": step["path"]}
        if body is not None:
            request_record["json"] = body
        if step.get("params"):
            request_record["params"] = step["params"]
        steps.append(
            {
                "request": request_record,
                "response": {
                    "status": response.status_code,
                    "json": normalize(payload, session_ids),
                },
            }
        )
    return steps


def main():
    corpus = load_corpus(REPO / "tests" / "fixtures" / "corpus")
    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(corpus, PipelineConfig(top_n=3), data_dir=tmp)
        with TestClient(app) as client:
            steps = drive(client)
    out = REPO / "tests" / "golden" / "api_transcript.json"
    out.write_text(json.dumps(steps, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"wrote {out} ({len(steps)} steps)")


if __name__ == "__main__":
    main()
