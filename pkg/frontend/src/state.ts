import type { ChatClient } from "./api.js";
import type { ChatResponse, UiMessage } from "./types.js";

export type SendState = "idle" | "waiting" | "error";

type Listener = () => void;

/** Transcript plus the one-in-flight send state machine.
 *
 * The message list is append-only: messages gain a strictly increasing
 * sequence number and are never mutated, reordered, or dropped. A failed
 * send keeps the composed text for retry and surfaces an ephemeral error
 * (rendered as a bubble) without touching the transcript.
 */
export class ChatStore {
  private messages: UiMessage[] = [];
  private seq = 0;
  private listeners: Listener[] = [];
  state: SendState = "idle";
  /** composed text preserved across a failed send, for retry */
  pendingText: string | null = null;
  lastError: string | null = null;

  constructor(
    private readonly client: ChatClient,
    private readonly now: () => number = Date.now,
  ) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of [...this.listeners]) listener();
  }

  get transcript(): readonly UiMessage[] {
    return this.messages;
  }

  get canSend(): boolean {
    return this.state !== "waiting";
  }

  private append(message: Omit<UiMessage, "seq" | "timestamp">): UiMessage {
    const entry: UiMessage = {
      ...message,
      seq: this.seq++,
      timestamp: this.now(),
    };
    this.messages.push(entry);
    this.notify();
    return entry;
  }

  /** Optimistically appends the user bubble, POSTs, appends the reply. */
  async send(text: string): Promise<void> {
    if (!text.trim() || this.state === "waiting") {
      return;
    }
    this.state = "waiting";
    this.lastError = null;
    this.pendingText = text;
    this.append({ role: "user", text });
    this.notify();
    await this.requestReply(text);
  }

  /** Re-sends the preserved text after a failure; no new user bubble. */
  async retry(): Promise<void> {
    if (this.state !== "error" || this.pendingText === null) {
      return;
    }
    this.state = "waiting";
    this.lastError = null;
    this.notify();
    await this.requestReply(this.pendingText);
  }

  private async requestReply(text: string): Promise<void> {
    try {
      const resp: ChatResponse = await this.client.chat(text);
      this.append({
        role: "agent",
        text: resp.answer,
        diagnostics: {
          qtype: resp.qtype,
          confidence: resp.confidence,
          entities: resp.entities,
          facts: resp.facts,
          traceId: resp.trace_id,
        },
      });
      this.state = "idle";
      this.pendingText = null;
      this.notify();
    } catch (err) {
      this.state = "error";
      this.lastError = err instanceof Error ? err.message : String(err);
      this.notify();
    }
  }
}
