/** Thin typed client for the session service endpoints. */

import type {
  CreateSessionRequest,
  Feedback,
  SessionStatus,
  TrialPayload,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class SessionApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  /** Absolute form of a server-relative URL (audio_url and friends). */
  resolve(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.resolve(path), init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  createSession(req: CreateSessionRequest): Promise<SessionStatus> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  status(token: string): Promise<SessionStatus> {
    return this.request(`/sessions/${token}`);
  }

  nextTrial(token: string): Promise<TrialPayload> {
    return this.request(`/sessions/${token}/next`);
  }

  /** Submits the response exactly as typed; no trimming or normalization. */
  submitResponse(token: string, stimulusId: string, response: string): Promise<Feedback> {
    return this.request(`/sessions/${token}/responses`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ stimulus_id: stimulusId, response }),
    });
  }

  async exportCsv(token: string): Promise<string> {
    const resp = await this.fetchFn(this.resolve(`/sessions/${token}/export`));
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return resp.text();
  }
}
