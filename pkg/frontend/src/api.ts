// Thin typed client over the gateway API. The transport is injectable so
// tests replay recorded responses without any server.

import type {
  ApiErrorBody, ExplanationPayload, IntentPayload, SessionPayload, Verdict,
} from "./types.js";

export interface TransportResponse {
  status: number;
  body: unknown;
}

export type Transport = (
  path: string,
  init: { method: "GET" | "POST"; body?: unknown },
) => Promise<TransportResponse>;

export class ApiRequestError extends Error {
  readonly status: number;
  readonly errorType: string;

  constructor(status: number, body: unknown) {
    const parsed = body as ApiErrorBody | undefined;
    const type = parsed?.error?.type ?? "UnknownError";
    super(parsed?.error?.message ?? `request failed with status ${status}`);
    this.status = status;
    this.errorType = type;
  }
}

export class NetworkError extends Error {}

export function fetchTransport(baseUrl: string): Transport {
  return async (path, init) => {
    let response: Response;
    try {
      response = await fetch(baseUrl + path, {
        method: init.method,
        headers: init.body !== undefined ? { "Content-Type": "application/json" } : {},
        body: init.body !== undefined ? JSON.stringify(init.body) : undefined,
      });
    } catch (err) {
      throw new NetworkError(String(err));
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    return { status: response.status, body };
  };
}

async function expectOk<T>(call: Promise<TransportResponse>): Promise<T> {
  const response = await call;
  if (response.status >= 400) {
    throw new ApiRequestError(response.status, response.body);
  }
  return response.body as T;
}

export class GatewayClient {
  constructor(private readonly transport: Transport) {}

  explain(command: string, sessionId?: string): Promise<ExplanationPayload> {
    const body: Record<string, string> = { command };
    if (sessionId) body["session_id"] = sessionId;
    return expectOk(this.transport("/v1/explain", { method: "POST", body }));
  }

  intent(behaviorText: string, k?: number): Promise<IntentPayload> {
    const body: Record<string, unknown> = { behavior_text: behaviorText };
    if (k !== undefined) body["k"] = k;
    return expectOk(this.transport("/v1/intent", { method: "POST", body }));
  }

  async createSession(): Promise<string> {
    const body = await expectOk<{ session_id: string }>(
      this.transport("/v1/sessions", { method: "POST", body: {} }),
    );
    return body.session_id;
  }

  ask(sessionId: string, question: string): Promise<{ answer: string }> {
    return expectOk(this.transport(`/v1/sessions/${sessionId}/ask`, {
      method: "POST", body: { question },
    }));
  }

  verdict(sessionId: string, command: string, verdict: Verdict): Promise<{ ok: boolean }> {
    return expectOk(this.transport(`/v1/sessions/${sessionId}/verdict`, {
      method: "POST", body: { command, verdict },
    }));
  }

  session(sessionId: string): Promise<SessionPayload> {
    return expectOk(this.transport(`/v1/sessions/${sessionId}`, { method: "GET" }));
  }
}
