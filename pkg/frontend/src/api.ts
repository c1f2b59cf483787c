import type {
  ApiSpec,
  LuDetail,
  LuListing,
  SessionSnapshot,
  TurnPayload,
} from "./types";

export const DEFAULT_BASE_URL = "http://127.0.0.1:8787";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body?.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`;
}

export interface ClientOptions {
  baseUrl?: string;
  token?: string;
}

/**
 * Typed client for the threadkb HTTP API. Carries the base URL and the
 * optional bearer token; every method returns parsed JSON or throws an
 * ApiError with the server's detail message.
 */
export class ThreadKbClient {
  readonly baseUrl: string;
  token: string;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? DEFAULT_BASE_URL).replace(/\/$/, "");
    this.token = options.token ?? "";
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await fetch(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  spec(): Promise<ApiSpec> {
    return this.request("GET", "/spec");
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  startSession(question: string): Promise<TurnPayload> {
    return this.request("POST", "/sessions", { question });
  }

  /** Answer the open turn; `turn` must echo the payload being answered. */
  sendFeedback(sessionId: string, turn: number, text: string): Promise<TurnPayload> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/feedback`, {
      turn,
      text,
    });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  searchLus(query: string, k = 10): Promise<LuListing> {
    const params = new URLSearchParams({ query, k: String(k) });
    return this.request("GET", `/lus?${params}`);
  }

  listLus(k = 25): Promise<LuListing> {
    return this.request("GET", `/lus?k=${k}`);
  }

  getLu(luId: string): Promise<LuDetail> {
    return this.request("GET", `/lus/${encodeURIComponent(luId)}`);
  }

  ingest(doc: { doc_id: string; title: string; text: string }): Promise<{
    doc_id: string;
    lu_ids: string[];
    lu_count: number;
    kb_size: number;
  }> {
    return this.request("POST", "/ingest", doc);
  }
}
