/** JSON contracts of the chat service, consumed verbatim. */

export type EntityType = "DS" | "DIS" | "MED" | "MISC";

export interface ChatEntity {
  surface: string;
  etype: EntityType;
  cui: string | null;
}

export interface ChatFact {
  kind: "relation" | "attribute";
  name: string;
  subject: string;
  object: string;
  value: string;
  source: string;
}

export interface ChatResponse {
  answer: string;
  qtype: string;
  confidence: number;
  entities: ChatEntity[];
  facts: ChatFact[];
  trace_id: string;
}

export interface HealthResponse {
  status: string;
  model_versions: Record<string, unknown>;
}

export interface Diagnostics {
  qtype: string;
  confidence: number;
  entities: ChatEntity[];
  facts: ChatFact[];
  traceId: string;
}

export interface UiMessage {
  role: "user" | "agent";
  text: string;
  timestamp: number;
  /** strictly increasing; ties in timestamp cannot reorder the transcript */
  seq: number;
  diagnostics?: Diagnostics;
}

/** Answers classified below this confidence render a distinct badge. */
export const LOW_CONFIDENCE_FLOOR = 0.4;
