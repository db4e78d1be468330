import type { ChatResponse, HealthResponse } from "./types.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status?: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class ChatClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async chat(text: string, sessionId?: string): Promise<ChatResponse> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.baseUrl}/chat`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(
          sessionId ? { text, session_id: sessionId } : { text },
        ),
      });
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      let detail = `HTTP ${resp.status}`;
      try {
        const body = await resp.json();
        if (body && typeof body.error === "string") detail = body.error;
      } catch {
        // error body was not JSON; keep the status line
      }
      throw new ServiceError(detail, resp.status);
    }
    const body = (await resp.json()) as ChatResponse;
    if (typeof body.answer !== "string" || !body.answer) {
      throw new ServiceError("malformed response: missing answer");
    }
    return {
      answer: body.answer,
      qtype: String(body.qtype ?? ""),
      confidence: Number(body.confidence ?? 0),
      entities: Array.isArray(body.entities) ? body.entities : [],
      facts: Array.isArray(body.facts) ? body.facts : [],
      trace_id: String(body.trace_id ?? ""),
    };
  }

  async health(): Promise<HealthResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/health`);
    if (!resp.ok) {
      throw new ServiceError(`HTTP ${resp.status}`, resp.status);
    }
    return (await resp.json()) as HealthResponse;
  }
}
