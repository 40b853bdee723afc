import {
  AnswerInput,
  ErrorBodySchema,
  JobDoc,
  JobDocSchema,
  SessionDoc,
  SessionDocSchema,
  TaskSummarySchema,
} from "./types.js";
import { z } from "zod";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly state: string | null;

  constructor(status: number, code: string, message: string, state: string | null = null) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.state = state;
  }
}

export type FetchFn = typeof fetch;

/** Thin typed client over the documented session endpoints; no hidden routes. */
export class StudioClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    schema: z.ZodType<T>,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload: unknown = await response.json();
    if (!response.ok) {
      const parsed = ErrorBodySchema.safeParse(payload);
      if (parsed.success) {
        throw new ApiError(
          response.status,
          parsed.data.code,
          parsed.data.message,
          parsed.data.state ?? null,
        );
      }
      throw new ApiError(response.status, "HttpError", `request failed: ${response.status}`);
    }
    return schema.parse(payload);
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health", z.object({ status: z.string() }).passthrough());
  }

  listTasks(dataset?: string) {
    const query = dataset ? `?dataset=${encodeURIComponent(dataset)}` : "";
    return this.request(
      "GET",
      `/tasks${query}`,
      z.object({ tasks: z.array(TaskSummarySchema) }),
    );
  }

  async createSession(input: { task_id?: string; task?: unknown; mode: string }): Promise<string> {
    const doc = await this.request(
      "POST",
      "/sessions",
      z.object({ session_id: z.string() }).passthrough(),
      input,
    );
    return doc.session_id;
  }

  getSession(sessionId: string): Promise<SessionDoc> {
    return this.request("GET", `/sessions/${sessionId}`, SessionDocSchema);
  }

  getTranscript(sessionId: string) {
    return this.request(
      "GET",
      `/sessions/${sessionId}/transcript`,
      z.object({ transcript: z.array(z.object({ role: z.string() }).passthrough()) }),
    );
  }

  private async startJob(path: string): Promise<string> {
    const doc = await this.request(
      "POST",
      path,
      z.object({ job_id: z.string() }).passthrough(),
    );
    return doc.job_id;
  }

  startParaphrase(sessionId: string): Promise<string> {
    return this.startJob(`/sessions/${sessionId}/paraphrase`);
  }

  startQuestions(sessionId: string): Promise<string> {
    return this.startJob(`/sessions/${sessionId}/questions`);
  }

  startGenerate(sessionId: string): Promise<string> {
    return this.startJob(`/sessions/${sessionId}/generate`);
  }

  getJob(jobId: string): Promise<JobDoc> {
    return this.request("GET", `/jobs/${jobId}`, JobDocSchema);
  }

  /** Whole-text section replacement; empty string deletes the section. */
  submitReview(sessionId: string, edits: Record<string, string>): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/review`, SessionDocSchema, { edits });
  }

  submitAnswers(sessionId: string, answers: AnswerInput[]): Promise<SessionDoc> {
    return this.request("POST", `/sessions/${sessionId}/answers`, SessionDocSchema, { answers });
  }

  finalize(sessionId: string): Promise<{ final_requirement: string; state: string }> {
    return this.request(
      "POST",
      `/sessions/${sessionId}/finalize`,
      z.object({ final_requirement: z.string(), state: z.string() }),
    );
  }
}
