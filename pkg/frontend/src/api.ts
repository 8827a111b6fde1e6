/** Typed client for the annotation service HTTP/JSON API. */

import type { SentenceRow, SpanTriple } from "./offsets.js";

export interface CoarseTask {
  doc_id: string;
  clean_text: string;
  raw_render_url: string;
}

export interface FineTask {
  session_id: string;
  doc_id: string;
  clean_text: string;
  title_guess: string | null;
  step: string;
  version: number;
}

export interface SessionState {
  session_id: string;
  doc_id: string;
  step: string;
  version: number;
  closed: boolean;
  outcome: string | null;
  actions: unknown[];
}

export interface ActionPayload {
  command: string;
  usage: string;
  spans: SpanTriple[];
}

export interface AdvanceBody {
  expected_version: number;
  step: string;
  keep?: boolean;
  title_span?: SpanTriple[];
  goal_spans?: SpanTriple[];
  summary?: string;
  action?: ActionPayload;
  finish?: boolean;
}

export interface CommandRow {
  command: string;
  count: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Minimal surface the wizard and coarse flows depend on; the fixture
 * service in tests implements the same interface. */
export interface AnnotationApi {
  nextTask(kind: "coarse"): Promise<CoarseTask | null>;
  nextTask(kind: "fine"): Promise<FineTask | null>;
  submitJudgment(body: {
    doc_id: string;
    is_single_text_tutorial: boolean;
    title_span?: SpanTriple[];
  }): Promise<{ status: string }>;
  sentences(docId: string): Promise<SentenceRow[]>;
  getSession(sessionId: string): Promise<SessionState>;
  advance(sessionId: string, body: AdvanceBody): Promise<SessionState>;
  commands(): Promise<CommandRow[]>;
}

export class HttpApi implements AnnotationApi {
  constructor(
    private baseUrl: string,
    private token: string,
  ) {}

  private async request(path: string, init: RequestInit = {}): Promise<unknown> {
    const response = await fetch(this.baseUrl + path, {
      ...init,
      headers: {
        Authorization: `Bearer ${this.token}`,
        "Content-Type": "application/json",
        ...(init.headers ?? {}),
      },
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const err = body as { code?: string; message?: string };
      throw new ApiError(response.status, err.code ?? "error", err.message ?? "request failed");
    }
    return body;
  }

  async nextTask(kind: "coarse" | "fine"): Promise<any> {
    const body = (await this.request(`/tasks/next?kind=${kind}`)) as Record<string, unknown>;
    return body[kind] ?? null;
  }

  async submitJudgment(body: {
    doc_id: string;
    is_single_text_tutorial: boolean;
    title_span?: SpanTriple[];
  }): Promise<{ status: string }> {
    return (await this.request("/judgments", {
      method: "POST",
      body: JSON.stringify(body),
    })) as { status: string };
  }

  async sentences(docId: string): Promise<SentenceRow[]> {
    return (await this.request(`/documents/${docId}/sentences`)) as SentenceRow[];
  }

  async getSession(sessionId: string): Promise<SessionState> {
    return (await this.request(`/sessions/${sessionId}`)) as SessionState;
  }

  async advance(sessionId: string, body: AdvanceBody): Promise<SessionState> {
    return (await this.request(`/sessions/${sessionId}/advance`, {
      method: "POST",
      body: JSON.stringify(body),
    })) as SessionState;
  }

  async commands(): Promise<CommandRow[]> {
    return (await this.request("/commands")) as CommandRow[];
  }
}
