/** Thin typed client for the review service. */

import {
  CaseDetail,
  DecisionBody,
  DecisionResult,
  Hotspot,
  QueueEntry,
  RoundInfo,
  RoundSummary,
} from "./types.js";

/** Server-reported failure, carrying the machine-readable code. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ReviewApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "network", `service unreachable: ${err}`);
    }
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      /* non-JSON error body */
    }
    if (!resp.ok) {
      const e = (body ?? {}) as { code?: string; message?: string };
      throw new ApiError(resp.status, e.code ?? "http_error", e.message ?? resp.statusText);
    }
    return body as T;
  }

  rounds(): Promise<RoundInfo[]> {
    return this.request("/api/rounds");
  }

  queue(roundId: string): Promise<QueueEntry[]> {
    return this.request(`/api/rounds/${encodeURIComponent(roundId)}/queue`);
  }

  summary(roundId: string): Promise<RoundSummary> {
    return this.request(`/api/rounds/${encodeURIComponent(roundId)}/summary`);
  }

  caseDetail(eventId: string): Promise<CaseDetail> {
    return this.request(`/api/cases/${encodeURIComponent(eventId)}`);
  }

  hotspot(includeRejected = false): Promise<Hotspot> {
    const flag = includeRejected ? "?include_rejected=true" : "";
    return this.request(`/api/hotspot${flag}`);
  }

  submitDecision(eventId: string, body: DecisionBody): Promise<DecisionResult> {
    return this.request(`/api/cases/${encodeURIComponent(eventId)}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
