import type { ChatClient } from "../src/api.js";
import type { ChatResponse } from "../src/types.js";

export function deferred<T>() {
  let resolve!: (value: T) => void;
  let reject!: (reason?: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

/** Shape captured from the live service's /chat endpoint. */
export function serviceResponse(
  overrides: Partial<ChatResponse> = {},
): ChatResponse {
  return {
    answer:
      "Here is what I found about Kratom: Kratom has been linked to serious safety concerns including dependence and liver injury.",
    qtype: "Safety",
    confidence: 0.5648,
    entities: [{ surface: "kratom", etype: "DS", cui: "C0015" }],
    facts: [
      {
        kind: "attribute",
        name: "safety",
        subject: "Kratom",
        object: "",
        value:
          "Kratom has been linked to serious safety concerns including dependence and liver injury.",
        source: "NMCD",
      },
    ],
    trace_id: "8c6b58d1a2f0c3e4",
    ...overrides,
  };
}

/** A ChatClient test double whose replies resolve under manual control. */
export class ManualClient {
  calls: string[] = [];
  private queue: Array<{
    promise: Promise<ChatResponse>;
    resolve: (value: ChatResponse) => void;
    reject: (reason?: unknown) => void;
  }> = [];

  chat(text: string): Promise<ChatResponse> {
    this.calls.push(text);
    const d = deferred<ChatResponse>();
    this.queue.push(d);
    return d.promise;
  }

  resolveNext(response: ChatResponse): void {
    const d = this.queue.shift();
    if (!d) throw new Error("no pending chat call");
    d.resolve(response);
  }

  rejectNext(error: Error): void {
    const d = this.queue.shift();
    if (!d) throw new Error("no pending chat call");
    d.reject(error);
  }

  asClient(): ChatClient {
    return this as unknown as ChatClient;
  }
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
