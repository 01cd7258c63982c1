/**
 * Browser bootstrap: wires the pure reducer/renderers to the DOM and the API
 * client. One request at a time per session; answer input stays local until
 * the verdict comes back.
 */

import { ApiClient, ApiError, type BookInfo } from "./api.js";
import { renderBookList, renderProgress, renderSession } from "./render.js";
import {
  canSubmit,
  idempotencyKeyFor,
  initialState,
  reduce,
  type SessionEvent,
  type SessionState,
} from "./state.js";

const api = new ApiClient("");
const root = document.getElementById("app") as HTMLElement;

let state: SessionState = initialState;
let books: BookInfo[] = [];

function dispatch(event: SessionEvent): void {
  state = reduce(state, event);
  draw();
}

function draw(): void {
  if (state.phase === "picking_book") {
    root.innerHTML = renderBookList(books);
    for (const button of root.querySelectorAll<HTMLButtonElement>(".book-choice")) {
      button.addEventListener("click", () => {
        void startSession(button.dataset.storyId ?? "");
      });
    }
    return;
  }

  root.innerHTML =
    renderSession(state) + (state.progress ? renderProgress(state.progress) : "");

  const input = root.querySelector<HTMLInputElement>("#answer-input");
  if (input) {
    input.addEventListener("input", () => {
      state = reduce(state, { kind: "input_changed", value: input.value });
      const submit = root.querySelector<HTMLButtonElement>("#submit-answer");
      if (submit) {
        submit.disabled = !canSubmit(state);
      }
    });
  }
  root.querySelector("#submit-answer")?.addEventListener("click", () => void submitAnswer());
  root.querySelector("#retry-answer")?.addEventListener("click", () => void retryAnswer());
  root.querySelector("#next-question")?.addEventListener("click", () => void advance());
  root.querySelector("#advance")?.addEventListener("click", () => void advance());
  root.querySelector("#retry")?.addEventListener("click", () => window.location.reload());
}

async function loadBooks(): Promise<void> {
  const payload = await api.listBooks();
  books = payload.books;
  draw();
}

async function startSession(storyId: string): Promise<void> {
  const book = books.find((b) => b.story_id === storyId);
  try {
    const session = await api.createSession(storyId);
    dispatch({ kind: "session_created", session, title: book?.title ?? storyId });
    await loadSection(session.current_section);
    await fetchNext();
  } catch (error) {
    fail(error, false);
  }
}

async function loadSection(index: number): Promise<void> {
  if (!state.storyId) return;
  const section = await api.getSection(state.storyId, index);
  dispatch({ kind: "section_loaded", section });
}

async function fetchNext(): Promise<void> {
  if (!state.sessionId) return;
  dispatch({ kind: "request_started" });
  try {
    const payload = await api.nextQuestion(state.sessionId);
    dispatch({ kind: "next_received", payload });
    if (payload.type === "advance_section") {
      await loadSection(payload.section_index);
    }
    if (payload.type === "session_complete") {
      await refreshProgress();
    }
  } catch (error) {
    fail(error, false);
  }
}

async function submitAnswer(): Promise<void> {
  if (!canSubmit(state) || !state.sessionId || !state.question) return;
  const key = idempotencyKeyFor(state.sessionId, state.question.id);
  dispatch({
    kind: "answer_submitted",
    questionId: state.question.id,
    text: state.input,
    idempotencyKey: key,
  });
  await postPendingAnswer();
}

async function retryAnswer(): Promise<void> {
  if (!state.pendingAnswer) return;
  dispatch({ kind: "request_started" });
  await postPendingAnswer();
}

async function postPendingAnswer(): Promise<void> {
  const pending = state.pendingAnswer;
  if (!pending || !state.sessionId) return;
  try {
    const payload = await api.submitAnswer(
      state.sessionId,
      pending.questionId,
      pending.text,
      pending.idempotencyKey,
    );
    dispatch({ kind: "verdict_received", payload });
    await refreshProgress();
  } catch (error) {
    // network failures keep the typed answer for retry; API errors are final
    fail(error, !(error instanceof ApiError));
  }
}

async function advance(): Promise<void> {
  await fetchNext();
}

async function refreshProgress(): Promise<void> {
  if (!state.sessionId) return;
  const payload = await api.getProgress(state.sessionId);
  dispatch({ kind: "progress_received", payload });
}

function fail(error: unknown, retryable: boolean): void {
  const message =
    error instanceof ApiError
      ? `${error.body.code}: ${error.body.message}`
      : error instanceof Error
        ? error.message
        : String(error);
  dispatch({ kind: "request_failed", message, retryable });
}

void loadBooks();
