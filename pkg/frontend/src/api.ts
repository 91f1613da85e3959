// Typed client for the gateway JSON API. The UI talks to the backend
// exclusively through this module.

export interface AskResponse {
  answer_id: string;
  answer: string;
  latency_ms: number;
}

export interface Scores {
  helpfulness: number;
  fluency: number;
  relevance: number;
  logic: number;
}

export interface SessionItem {
  item_id: string;
  question: string;
  displayed_answer: string;
  session_id: string;
}

export interface SessionPayload {
  session_id: string;
  mode: "pairwise" | "blended";
  status: string;
  items: SessionItem[];
}

export class GatewayError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "GatewayError";
  }

  /** Network failures and 5xx are worth retrying; 4xx are not. */
  get transient(): boolean {
    return this.status === 0 || this.status >= 500;
  }
}

type FetchFn = typeof fetch;

async function parseError(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // fall through to status text
  }
  return `HTTP ${response.status}`;
}

export class GatewayApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, {
        headers: { "Content-Type": "application/json" },
        ...init,
      });
    } catch (err) {
      throw new GatewayError(0, `network error: ${String(err)}`);
    }
    if (!response.ok) {
      throw new GatewayError(response.status, await parseError(response));
    }
    return (await response.json()) as T;
  }

  ask(question: string): Promise<AskResponse> {
    return this.request<AskResponse>("/api/ask", {
      method: "POST",
      body: JSON.stringify({ question }),
    });
  }

  async rate(answerId: string, scores: Scores, raterId?: string): Promise<void> {
    await this.request<{ ok: boolean }>("/api/rate", {
      method: "POST",
      headers: raterId
        ? { "Content-Type": "application/json", "X-Rater-Id": raterId }
        : { "Content-Type": "application/json" },
      body: JSON.stringify({ answer_id: answerId, ...scores }),
    });
  }

  fetchSession(sessionId: string): Promise<SessionPayload> {
    return this.request<SessionPayload>(
      `/api/eval/session/${encodeURIComponent(sessionId)}`,
    );
  }

  async submitEval(
    sessionId: string,
    itemId: string,
    raterId: string,
    scores: Scores,
  ): Promise<void> {
    await this.request<{ ok: boolean }>("/api/eval/submit", {
      method: "POST",
      body: JSON.stringify({
        session_id: sessionId,
        item_id: itemId,
        rater_id: raterId,
        ...scores,
      }),
    });
  }
}

/** Gateway base URL: explicit global, ?gateway= query, or same origin. */
export function resolveGatewayUrl(win: Window): string {
  const injected = (win as Window & { COUNSELQA_GATEWAY?: string }).COUNSELQA_GATEWAY;
  if (injected) return injected.replace(/\/$/, "");
  const fromQuery = new URLSearchParams(win.location.search).get("gateway");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  return "";
}
