/**
 * Typed client for the fablegen /v1 HTTP API.
 *
 * Every call in the app goes through this module; the shapes below mirror
 * the server's JSON schema exactly.
 */

export interface BookInfo {
  story_id: string;
  title: string;
  split: string;
  section_count: number;
}

export interface SectionPayload {
  story_id: string;
  index: number;
  text: string;
  section_count: number;
}

export interface SessionPayload {
  session_id: string;
  story_id: string;
  current_section: number;
  created_at: string;
  updated_at: string;
}

export type NextPayload =
  | {
      type: "question";
      question_id: string;
      question: string;
      is_followup: boolean;
      section_index: number;
    }
  | { type: "advance_section"; section_index: number }
  | { type: "session_complete" };

export type FeedbackHint = "exact" | "partial" | "miss";

export interface Verdict {
  correct: boolean;
  similarity: number;
  feedback_hint: FeedbackHint;
}

export interface AnswerPayload {
  question_id: string;
  verdict: Verdict;
  replayed: boolean;
}

export interface ProgressRow {
  section_index: number;
  planned: number;
  served: number;
  answered: number;
  correct: number;
}

export interface TranscriptEntry {
  question_id: string;
  section_index: number;
  question: string;
  gold_answer: string;
  user_answer: string | null;
  is_followup: boolean;
  verdict: Verdict | null;
}

export interface ProgressPayload {
  session_id: string;
  story_id: string;
  current_section: number;
  sections: ProgressRow[];
  transcript: TranscriptEntry[];
}

export interface ErrorBody {
  code: string;
  message: string;
  detail: string | null;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ErrorBody,
  ) {
    super(body.message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload as ErrorBody);
    }
    return payload as T;
  }

  listBooks(): Promise<{ books: BookInfo[] }> {
    return this.request("GET", "/v1/books");
  }

  getSection(storyId: string, index: number): Promise<SectionPayload> {
    return this.request("GET", `/v1/books/${encodeURIComponent(storyId)}/sections/${index}`);
  }

  createSession(storyId: string): Promise<SessionPayload> {
    return this.request("POST", "/v1/sessions", { story_id: storyId });
  }

  nextQuestion(sessionId: string): Promise<NextPayload> {
    return this.request("GET", `/v1/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  submitAnswer(
    sessionId: string,
    questionId: string,
    userAnswer: string,
    idempotencyKey: string,
  ): Promise<AnswerPayload> {
    return this.request("POST", `/v1/sessions/${encodeURIComponent(sessionId)}/answer`, {
      question_id: questionId,
      user_answer: userAnswer,
      idempotency_key: idempotencyKey,
    });
  }

  getProgress(sessionId: string): Promise<ProgressPayload> {
    return this.request("GET", `/v1/sessions/${encodeURIComponent(sessionId)}/progress`);
  }
}
