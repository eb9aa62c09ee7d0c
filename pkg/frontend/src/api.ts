import {
  ApiErrorBody,
  ConflictsResponse,
  CreateSessionRequest,
  CreateSessionResponse,
  DecisionResponse,
} from "./types.js";

/** Service error with the body the API returned, surfaced verbatim. */
export class ApiError extends Error {
  constructor(public status: number, public body: ApiErrorBody) {
    super(body.message);
  }

  locationText(): string {
    const loc = this.body.location;
    if (!loc) return "";
    const parts: string[] = [];
    if (loc.domain_id) parts.push(`domain ${loc.domain_id}`);
    if (loc.line !== undefined) parts.push(`line ${loc.line}, col ${loc.col}`);
    if (loc.path) parts.push(loc.path);
    return parts.join(", ");
  }
}

export interface ApiClient {
  createSession(body: CreateSessionRequest): Promise<CreateSessionResponse>;
  getConflicts(sessionId: string): Promise<ConflictsResponse>;
  postDecision(
    sessionId: string,
    conflictId: string,
    action: Record<string, unknown>,
  ): Promise<DecisionResponse>;
  exportUrl(sessionId: string, what: string, format?: string): string;
}

export class HttpApiClient implements ApiClient {
  constructor(
    private base: string = "",
    private fetcher: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetcher(this.base + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ApiErrorBody);
    }
    return body as T;
  }

  createSession(body: CreateSessionRequest): Promise<CreateSessionResponse> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  getConflicts(sessionId: string): Promise<ConflictsResponse> {
    return this.request(`/sessions/${sessionId}/conflicts`);
  }

  postDecision(
    sessionId: string,
    conflictId: string,
    action: Record<string, unknown>,
  ): Promise<DecisionResponse> {
    return this.request(
      `/sessions/${sessionId}/conflicts/${conflictId}/decision`,
      { method: "POST", body: JSON.stringify({ action }) },
    );
  }

  exportUrl(sessionId: string, what: string, format = "canonical"): string {
    return `${this.base}/sessions/${sessionId}/export?what=${what}&format=${format}`;
  }
}
