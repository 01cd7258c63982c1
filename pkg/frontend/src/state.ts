/**
 * Session view state as a pure function of server responses and local input.
 *
 * The reducer is the only place state changes; replaying a recorded sequence
 * of events always reproduces the identical state (and therefore identical
 * rendered output).
 */

import type {
  AnswerPayload,
  NextPayload,
  ProgressPayload,
  SectionPayload,
  SessionPayload,
  Verdict,
} from "./api.js";

export type Phase =
  | "picking_book"
  | "loading"
  | "answering"
  | "showing_verdict"
  | "between_sections"
  | "complete"
  | "error";

export interface QuestionView {
  id: string;
  text: string;
  isFollowup: boolean;
}

export interface SessionState {
  phase: Phase;
  sessionId: string | null;
  storyId: string | null;
  storyTitle: string;
  sectionIndex: number;
  sectionCount: number;
  sectionText: string;
  question: QuestionView | null;
  input: string;
  /** Verdict of the most recent submission; cleared when a new question arrives. */
  verdict: Verdict | null;
  /** True while a request is in flight; the UI allows one at a time. */
  busy: boolean;
  /** Answer retained for retry when a submission fails on the network. */
  pendingAnswer: { questionId: string; text: string; idempotencyKey: string } | null;
  progress: ProgressPayload | null;
  error: string | null;
}

export const initialState: SessionState = {
  phase: "picking_book",
  sessionId: null,
  storyId: null,
  storyTitle: "",
  sectionIndex: 1,
  sectionCount: 0,
  sectionText: "",
  question: null,
  input: "",
  verdict: null,
  busy: false,
  pendingAnswer: null,
  progress: null,
  error: null,
};

export type SessionEvent =
  | { kind: "request_started" }
  | { kind: "session_created"; session: SessionPayload; title: string }
  | { kind: "section_loaded"; section: SectionPayload }
  | { kind: "next_received"; payload: NextPayload }
  | { kind: "input_changed"; value: string }
  | { kind: "answer_submitted"; questionId: string; text: string; idempotencyKey: string }
  | { kind: "verdict_received"; payload: AnswerPayload }
  | { kind: "progress_received"; payload: ProgressPayload }
  | { kind: "request_failed"; message: string; retryable: boolean };

export function reduce(state: SessionState, event: SessionEvent): SessionState {
  switch (event.kind) {
    case "request_started":
      return { ...state, busy: true, error: null };

    case "session_created":
      return {
        ...initialState,
        phase: "loading",
        sessionId: event.session.session_id,
        storyId: event.session.story_id,
        storyTitle: event.title,
        sectionIndex: event.session.current_section,
      };

    case "section_loaded":
      return {
        ...state,
        busy: false,
        sectionIndex: event.section.index,
        sectionCount: event.section.section_count,
        sectionText: event.section.text,
      };

    case "next_received": {
      const payload = event.payload;
      if (payload.type === "question") {
        return {
          ...state,
          busy: false,
          phase: "answering",
          sectionIndex: payload.section_index,
          question: {
            id: payload.question_id,
            text: payload.question,
            isFollowup: payload.is_followup,
          },
          input: "",
          verdict: null, // the banner only ever reflects a submitted answer
          pendingAnswer: null,
        };
      }
      if (payload.type === "advance_section") {
        return {
          ...state,
          busy: false,
          phase: "between_sections",
          sectionIndex: payload.section_index,
          question: null,
          verdict: null,
        };
      }
      return { ...state, busy: false, phase: "complete", question: null, verdict: null };
    }

    case "input_changed":
      // typing is local; it never touches the question or verdict
      return { ...state, input: event.value };

    case "answer_submitted":
      return {
        ...state,
        busy: true,
        pendingAnswer: {
          questionId: event.questionId,
          text: event.text,
          idempotencyKey: event.idempotencyKey,
        },
      };

    case "verdict_received":
      return {
        ...state,
        busy: false,
        phase: "showing_verdict",
        verdict: event.payload.verdict,
        pendingAnswer: null,
      };

    case "progress_received":
      return { ...state, busy: false, progress: event.payload };

    case "request_failed":
      if (event.retryable && state.pendingAnswer) {
        // keep the typed answer and its idempotency key for a safe retry
        return { ...state, busy: false, error: event.message };
      }
      return { ...state, busy: false, phase: "error", error: event.message };
  }
}

/** Stable idempotency key for one (session, question) submission. */
export function idempotencyKeyFor(sessionId: string, questionId: string): string {
  return `${sessionId}:${questionId}`;
}

export function canSubmit(state: SessionState): boolean {
  return (
    state.phase === "answering" &&
    !state.busy &&
    state.question !== null &&
    state.input.trim().length > 0
  );
}
