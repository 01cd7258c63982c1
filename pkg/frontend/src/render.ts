/**
 * Pure HTML renderers. Given the same state they always return the same
 * string, which is what the snapshot tests pin down.
 */

import type { BookInfo, ProgressPayload, Verdict } from "./api.js";
import type { SessionState } from "./state.js";
import { canSubmit } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const BANNER_COPY: Record<Verdict["feedback_hint"], string> = {
  exact: "You got it! Great listening!",
  partial: "Close! You found part of the answer.",
  miss: "Good try! Listen again and have another think.",
};

export function renderBookList(books: BookInfo[]): string {
  const items = books
    .map(
      (book) =>
        `<li><button class="book-choice" data-story-id="${escapeHtml(book.story_id)}">` +
        `${escapeHtml(book.title)} <span class="muted">(${book.section_count} parts)</span>` +
        `</button></li>`,
    )
    .join("");
  return `<section class="book-list"><h2>Pick a story</h2><ul>${items}</ul></section>`;
}

export function renderVerdictBanner(verdict: Verdict | null): string {
  if (verdict === null) {
    return ""; // banner appears only after an answer submission
  }
  const hint = verdict.feedback_hint;
  return (
    `<div class="banner banner-${hint}" role="status">` +
    `<strong>${escapeHtml(BANNER_COPY[hint])}</strong>` +
    `</div>`
  );
}

export function renderSession(state: SessionState): string {
  if (state.phase === "error") {
    return (
      `<section class="error-view"><h2>Something went wrong</h2>` +
      `<p>${escapeHtml(state.error ?? "unknown error")}</p>` +
      `<button id="retry">Try again</button></section>`
    );
  }

  const parts: string[] = [];
  parts.push(`<header><h1>${escapeHtml(state.storyTitle)}</h1></header>`);
  parts.push(
    `<p class="section-label">Part ${state.sectionIndex}` +
      (state.sectionCount ? ` of ${state.sectionCount}` : "") +
      `</p>`,
  );
  parts.push(`<article class="section-text">${escapeHtml(state.sectionText)}</article>`);

  if (state.phase === "complete") {
    parts.push(`<div class="complete-view"><h2>The story is finished!</h2></div>`);
  } else if (state.phase === "between_sections") {
    parts.push(
      `<div class="advance-view"><button id="advance">Read on to part ${state.sectionIndex}</button></div>`,
    );
  } else if (state.question !== null) {
    const badge = state.question.isFollowup
      ? `<span class="followup-badge">follow-up</span>`
      : "";
    parts.push(
      `<section class="question-card">` +
        badge +
        `<p class="question-text">${escapeHtml(state.question.text)}</p>` +
        renderVerdictBanner(state.verdict) +
        renderAnswerControls(state) +
        `</section>`,
    );
  } else if (state.phase === "loading" || state.busy) {
    parts.push(`<p class="loading">Loading…</p>`);
  }

  if (state.error) {
    // phase "error" returned above; this is the retryable, answer-kept case
    parts.push(
      `<p class="soft-error">${escapeHtml(state.error)} ` +
        `<button id="retry-answer">Send again</button></p>`,
    );
  }

  return `<main class="session-view">${parts.join("")}</main>`;
}

function renderAnswerControls(state: SessionState): string {
  if (state.phase === "showing_verdict") {
    return `<button id="next-question" ${state.busy ? "disabled" : ""}>Next question</button>`;
  }
  const disabled = state.busy ? "disabled" : "";
  const submitDisabled = canSubmit(state) ? "" : "disabled";
  return (
    `<div class="answer-row">` +
    `<input id="answer-input" type="text" placeholder="Type your answer" ` +
    `value="${escapeHtml(state.input)}" ${disabled} />` +
    `<button id="submit-answer" ${submitDisabled}>Answer</button>` +
    `</div>`
  );
}

export function renderProgress(progress: ProgressPayload): string {
  const rows = progress.sections
    .map(
      (row) =>
        `<tr><td>Part ${row.section_index}</td><td>${row.answered}/${row.planned}</td>` +
        `<td>${row.correct}</td></tr>`,
    )
    .join("");
  const transcript = progress.transcript
    .map((entry) => {
      const verdict = entry.verdict
        ? `${entry.verdict.feedback_hint} (${entry.verdict.similarity.toFixed(2)})`
        : "not answered";
      const badge = entry.is_followup ? " [follow-up]" : "";
      return (
        `<li><span class="q">${escapeHtml(entry.question)}</span>${badge}` +
        `<br/>answered: ${escapeHtml(entry.user_answer ?? "—")} → ${escapeHtml(verdict)}</li>`
      );
    })
    .join("");
  return (
    `<section class="progress-view">` +
    `<h2>Reading progress</h2>` +
    `<table><thead><tr><th>Part</th><th>Answered</th><th>Correct</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<h3>Every question</h3><ol class="transcript">${transcript}</ol>` +
    `</section>`
  );
}
