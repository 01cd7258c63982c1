import { describe, expect, it } from "vitest";

import type { AnswerPayload, NextPayload, ProgressPayload, SessionPayload } from "../src/api.js";
import {
  canSubmit,
  idempotencyKeyFor,
  initialState,
  reduce,
  type SessionEvent,
  type SessionState,
} from "../src/state.js";

import transcript from "./fixtures/transcript.json";

const session = transcript.session as SessionPayload;
const flow = transcript.flow as Array<{
  next: NextPayload;
  user_answer: string | null;
  answer: AnswerPayload | null;
}>;

export function eventsFromTranscript(): SessionEvent[] {
  const events: SessionEvent[] = [
    { kind: "session_created", session, title: "The Junket Tale" },
    { kind: "section_loaded", section: transcript.section as never },
  ];
  for (const step of flow) {
    events.push({ kind: "next_received", payload: step.next });
    if (step.user_answer !== null && step.answer !== null && step.next.type === "question") {
      events.push({ kind: "input_changed", value: step.user_answer });
      events.push({
        kind: "answer_submitted",
        questionId: step.next.question_id,
        text: step.user_answer,
        idempotencyKey: idempotencyKeyFor(session.session_id, step.next.question_id),
      });
      events.push({ kind: "verdict_received", payload: step.answer });
    }
  }
  events.push({ kind: "progress_received", payload: transcript.progress as ProgressPayload });
  return events;
}

function replay(events: SessionEvent[]): SessionState {
  return events.reduce(reduce, initialState);
}

describe("session state reducer", () => {
  it("is deterministic: replaying the transcript twice gives identical state", () => {
    const events = eventsFromTranscript();
    expect(replay(events)).toEqual(replay(events));
  });

  it("never shows a verdict before an answer submission", () => {
    const events = eventsFromTranscript();
    let state = initialState;
    let submitted = 0;
    for (const event of events) {
      if (event.kind === "answer_submitted") {
        submitted += 1;
      }
      state = reduce(state, event);
      if (submitted === 0) {
        expect(state.verdict).toBeNull();
      }
    }
  });

  it("clears the verdict when the next question arrives", () => {
    const events = eventsFromTranscript();
    let state = initialState;
    for (const event of events) {
      state = reduce(state, event);
      if (event.kind === "next_received" && event.payload.type === "question") {
        expect(state.verdict).toBeNull();
        expect(state.input).toBe("");
      }
    }
  });

  it("keeps the question text exactly as the server sent it", () => {
    let state = initialState;
    for (const event of eventsFromTranscript()) {
      state = reduce(state, event);
      if (event.kind === "next_received" && event.payload.type === "question") {
        expect(state.question?.text).toBe(event.payload.question);
        expect(state.question?.isFollowup).toBe(event.payload.is_followup);
      }
    }
  });

  it("marks the follow-up question from the transcript", () => {
    const state = replay(eventsFromTranscript());
    // the transcript's final question is a follow-up
    expect(state.question?.isFollowup).toBe(true);
  });

  it("disables submission until there is input", () => {
    let state = replay([
      { kind: "session_created", session, title: "t" },
      { kind: "next_received", payload: flow[0]!.next },
    ]);
    expect(canSubmit(state)).toBe(false);
    state = reduce(state, { kind: "input_changed", value: "   " });
    expect(canSubmit(state)).toBe(false);
    state = reduce(state, { kind: "input_changed", value: "a junket" });
    expect(canSubmit(state)).toBe(true);
  });

  it("blocks a second request while one is in flight", () => {
    let state = replay([
      { kind: "session_created", session, title: "t" },
      { kind: "next_received", payload: flow[0]!.next },
      { kind: "input_changed", value: "a junket" },
    ]);
    state = reduce(state, {
      kind: "answer_submitted",
      questionId: "q",
      text: "a junket",
      idempotencyKey: "k",
    });
    expect(state.busy).toBe(true);
    expect(canSubmit(state)).toBe(false);
  });

  it("retains the typed answer and idempotency key after a network failure", () => {
    let state = replay([
      { kind: "session_created", session, title: "t" },
      { kind: "next_received", payload: flow[0]!.next },
      { kind: "input_changed", value: "a junket" },
      {
        kind: "answer_submitted",
        questionId: "qid",
        text: "a junket",
        idempotencyKey: "session:qid",
      },
    ]);
    state = reduce(state, { kind: "request_failed", message: "network down", retryable: true });
    expect(state.phase).not.toBe("error");
    expect(state.pendingAnswer).toEqual({
      questionId: "qid",
      text: "a junket",
      idempotencyKey: "session:qid",
    });
    // the retry reuses the same key, so the server records one attempt
    expect(state.pendingAnswer?.idempotencyKey).toBe("session:qid");
  });

  it("a non-retryable failure becomes the error view", () => {
    const state = reduce(initialState, {
      kind: "request_failed",
      message: "not_found: unknown story",
      retryable: false,
    });
    expect(state.phase).toBe("error");
    expect(state.error).toContain("unknown story");
  });

  it("advance and completion transitions", () => {
    let state = replay([{ kind: "session_created", session, title: "t" }]);
    state = reduce(state, {
      kind: "next_received",
      payload: { type: "advance_section", section_index: 2 },
    });
    expect(state.phase).toBe("between_sections");
    expect(state.sectionIndex).toBe(2);
    state = reduce(state, { kind: "next_received", payload: { type: "session_complete" } });
    expect(state.phase).toBe("complete");
    expect(state.question).toBeNull();
  });
});
