"""Reading sessions for the interactive storyteller.

Each session is persisted as an append-only JSON event log (one file per
session); replaying the log reconstructs the exact session state, so there is
no database dependency. Questions come from the pipeline's top-N output per
section; after each answered question, an unserved lower-ranked pair whose
provenance overlaps the answered one is served once as a follow-up.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Corpus
from .errors import FablegenError
from .pipeline import PipelineConfig, Verdict, judge_answer, run_pipeline
from .ranker import RankedQAPair


class SessionError(FablegenError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class PlannedQuestion:
    question_id: str
    section_index: int
    rank: int
    question: str
    gold_answer: str
    provenance_spans: tuple[tuple[int, int], ...]


@dataclass
class AskedRecord:
    question_id: str
    question: str
    gold_answer: str
    is_followup: bool
    user_answer: str | None = None
    verdict: Verdict | None = None
    followup_used: bool = False
    idempotency_key: str | None = None


@dataclass
class ReadingSession:
    session_id: str
    story_id: str
    current_section: int
    asked: list[AskedRecord] = field(default_factory=list)
    created_at: str = ""
    updated_at: str = ""

    def record(self, question_id: str) -> AskedRecord | None:
        for rec in self.asked:
            if rec.question_id == question_id:
                return rec
        return None

    def by_key(self, idempotency_key: str) -> AskedRecord | None:
        for rec in self.asked:
            if rec.idempotency_key == idempotency_key:
                return rec
        return None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _spans_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


class SessionStore:
    """Single-writer-per-session store over JSONL event logs."""

    def __init__(self, corpus: Corpus, config: PipelineConfig, data_dir: str | Path):
        self.corpus = corpus
        self.config = config
        self.data_dir = Path(data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self._plans: dict[str, dict[int, list[PlannedQuestion]]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global_lock = threading.Lock()

    # -- question plans -------------------------------------------------------

    def plan_for(self, story_id: str) -> dict[int, list[PlannedQuestion]]:
        """Pipeline output for a story, computed once (backends are deterministic)."""
        if story_id not in self._plans:
            story = self.corpus.story(story_id)
            result = run_pipeline(story, self.config)
            plan: dict[int, list[PlannedQuestion]] = {}
            for index in sorted(result.pairs):
                plan[index] = [
                    self._planned(story_id, index, rank, pair)
                    for rank, pair in enumerate(result.pairs[index])
                ]
            self._plans[story_id] = plan
        return self._plans[story_id]

    @staticmethod
    def _planned(story_id: str, section: int, rank: int, pair: RankedQAPair) -> PlannedQuestion:
        spans: tuple[tuple[int, int], ...] = ()
        if pair.provenance is not None:
            spans = tuple(pair.provenance.provenance_spans)
        return PlannedQuestion(
            question_id=f"{story_id}:s{section}:q{rank}",
            section_index=section,
            rank=rank,
            question=pair.question,
            gold_answer=pair.answer,
            provenance_spans=spans,
        )

    # -- event log ------------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        event = {"ts": _now(), **event}
        with self._log_path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")

    def _events(self, session_id: str) -> list[dict]:
        path = self._log_path(session_id)
        if not path.exists():
            raise SessionError("not_found", f"unknown session '{session_id}'")
        with path.open(encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def _lock(self, session_id: str) -> threading.Lock:
        with self._global_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    # -- state reconstruction ---------------------------------------------------

    def load(self, session_id: str) -> ReadingSession:
        return self._fold(session_id, self._events(session_id))

    def _fold(self, session_id: str, events: list[dict]) -> ReadingSession:
        if not events or events[0]["type"] != "created":
            raise SessionError("corrupt_log", f"session '{session_id}' log has no creation event")
        head = events[0]
        session = ReadingSession(
            session_id=session_id,
            story_id=head["story_id"],
            current_section=1,
            created_at=head["ts"],
            updated_at=head["ts"],
        )
        plan = self.plan_for(session.story_id)
        planned_by_id = {p.question_id: p for qs in plan.values() for p in qs}
        for event in events[1:]:
            session.updated_at = event["ts"]
            if event["type"] == "served":
                planned = planned_by_id[event["question_id"]]
                session.asked.append(
                    AskedRecord(
                        question_id=planned.question_id,
                        question=planned.question,
                        gold_answer=planned.gold_answer,
                        is_followup=event.get("is_followup", False),
                    )
                )
                followup_of = event.get("followup_of")
                if followup_of:
                    rec = session.record(followup_of)
                    if rec is not None:
                        rec.followup_used = True
            elif event["type"] == "answered":
                rec = session.record(event["question_id"])
                if rec is not None:
                    rec.user_answer = event["user_answer"]
                    rec.verdict = Verdict(**event["verdict"])
                    rec.idempotency_key = event.get("idempotency_key")
            elif event["type"] == "advanced":
                session.current_section = event["section_index"]
        return session

    # -- operations -------------------------------------------------------------

    def create(self, story_id: str) -> ReadingSession:
        if not self.corpus.has_story(story_id):
            raise SessionError("not_found", f"unknown story '{story_id}'")
        session_id = uuid.uuid4().hex[:12]
        self._append(session_id, {"type": "created", "story_id": story_id})
        return self.load(session_id)

    def _pending(self, session: ReadingSession) -> AskedRecord | None:
        for rec in session.asked:
            if rec.user_answer is None:
                return rec
        return None

    def _next_decision(self, session: ReadingSession) -> dict:
        """Decide the next payload purely from session state (replay-safe)."""
        plan = self.plan_for(session.story_id)
        story = self.corpus.story(session.story_id)
        max_section = max(s.index for s in story.sections)

        pending = self._pending(session)
        if pending is not None:
            return {
                "type": "question",
                "question_id": pending.question_id,
                "question": pending.question,
                "is_followup": pending.is_followup,
                "section_index": session.current_section,
                "already_served": True,
            }

        section_plan = plan.get(session.current_section, [])
        served_ids = {rec.question_id for rec in session.asked}
        planned_by_id = {p.question_id: p for p in section_plan}

        answered_here = [
            rec
            for rec in session.asked
            if rec.user_answer is not None and rec.question_id in planned_by_id
        ]
        if answered_here:
            last = answered_here[-1]
            if not last.followup_used:
                followup = self._followup_for(last, section_plan, served_ids)
                if followup is not None:
                    return {
                        "type": "question",
                        "question_id": followup.question_id,
                        "question": followup.question,
                        "is_followup": True,
                        "followup_of": last.question_id,
                        "section_index": session.current_section,
                        "already_served": False,
                    }

        for planned in section_plan:
            if planned.question_id not in served_ids:
                return {
                    "type": "question",
                    "question_id": planned.question_id,
                    "question": planned.question,
                    "is_followup": False,
                    "section_index": session.current_section,
                    "already_served": False,
                }

        if session.current_section < max_section:
            return {"type": "advance_section", "section_index": session.current_section + 1}
        return {"type": "session_complete"}

    def _followup_for(
        self,
        answered: AskedRecord,
        section_plan: list[PlannedQuestion],
        served_ids: set[str],
    ) -> PlannedQuestion | None:
        origin = next(
            (p for p in section_plan if p.question_id == answered.question_id), None
        )
        if origin is None or not origin.provenance_spans:
            return None
        for planned in section_plan:
            if planned.question_id in served_ids or planned.rank <= origin.rank:
                continue
            if any(
                _spans_overlap(a, b)
                for a in origin.provenance_spans
                for b in planned.provenance_spans
            ):
                return planned
        return None

    def next_question(self, session_id: str) -> dict:
        """Serve the next question, a follow-up, an advance signal, or completion."""
        with self._lock(session_id):
            session = self.load(session_id)
            decision = self._next_decision(session)
            if decision["type"] == "question" and not decision.pop("already_served"):
                event = {
                    "type": "served",
                    "question_id": decision["question_id"],
                    "is_followup": decision["is_followup"],
                }
                if "followup_of" in decision:
                    event["followup_of"] = decision["followup_of"]
                self._append(session_id, event)
            elif decision["type"] == "question":
                decision.pop("already_served", None)
            elif decision["type"] == "advance_section":
                self._append(
                    session_id,
                    {"type": "advanced", "section_index": decision["section_index"]},
                )
            decision.pop("followup_of", None)
            return decision

    def answer(
        self,
        session_id: str,
        question_id: str,
        user_answer: str,
        idempotency_key: str | None = None,
    ) -> tuple[Verdict, bool]:
        """Judge an answer; a repeated idempotency key replays the stored verdict."""
        with self._lock(session_id):
            session = self.load(session_id)
            if idempotency_key:
                existing = session.by_key(idempotency_key)
                if existing is not None and existing.verdict is not None:
                    return existing.verdict, True
            rec = session.record(question_id)
            if rec is None:
                raise SessionError(
                    "question_not_served",
                    f"question '{question_id}' was never served in this session",
                )
            if rec.verdict is not None:
                raise SessionError(
                    "already_answered", f"question '{question_id}' was already answered"
                )
            verdict = judge_answer(user_answer, rec.gold_answer, self.config.judge_threshold)
            self._append(
                session_id,
                {
                    "type": "answered",
                    "question_id": question_id,
                    "user_answer": user_answer,
                    "verdict": verdict.to_dict(),
                    "idempotency_key": idempotency_key,
                },
            )
            return verdict, False

    def progress(self, session_id: str) -> dict:
        """Parent-facing view: per-section counts plus the full transcript."""
        session = self.load(session_id)
        story = self.corpus.story(session.story_id)
        plan = self.plan_for(session.story_id)
        by_section: dict[int, dict] = {
            s.index: {"section_index": s.index, "planned": len(plan.get(s.index, [])),
                      "served": 0, "answered": 0, "correct": 0}
            for s in story.sections
        }
        transcript = []
        for rec in session.asked:
            section = int(rec.question_id.split(":s")[1].split(":")[0])
            row = by_section[section]
            row["served"] += 1
            if rec.verdict is not None:
                row["answered"] += 1
                if rec.verdict.correct:
                    row["correct"] += 1
            transcript.append(
                {
                    "question_id": rec.question_id,
                    "section_index": section,
                    "question": rec.question,
                    "gold_answer": rec.gold_answer,
                    "user_answer": rec.user_answer,
                    "is_followup": rec.is_followup,
                    "verdict": rec.verdict.to_dict() if rec.verdict else None,
                }
            )
        return {
            "session_id": session.session_id,
            "story_id": session.story_id,
            "current_section": session.current_section,
            "sections": [by_section[i] for i in sorted(by_section)],
            "transcript": transcript,
        }

    def session_view(self, session: ReadingSession) -> dict:
        return {
            "session_id": session.session_id,
            "story_id": session.story_id,
            "current_section": session.current_section,
            "created_at": session.created_at,
            "updated_at": session.updated_at,
        }
