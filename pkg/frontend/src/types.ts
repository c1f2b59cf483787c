// Wire types for the threadkb HTTP API (see GET /api/v1/spec).

export type SessionStatus =
  | "active"
  | "awaiting_feedback"
  | "awaiting_clarification"
  | "mitigated"
  | "escalated"
  | "no_info"
  | "exhausted";

export type ResponseKind =
  | "plan"
  | "step_instruction"
  | "clarify_question"
  | "mitigated"
  | "escalate"
  | "no_info";

export type LinkerToken = "CONTINUE" | "CROSS" | "MITIGATE";

export const TERMINAL_STATUSES: ReadonlySet<SessionStatus> = new Set([
  "mitigated",
  "escalated",
  "no_info",
  "exhausted",
]);

export interface Branch {
  condition: string;
  next_intent: string;
  token: LinkerToken;
  catch_all: boolean;
}

export interface TurnPayload {
  session_id: string;
  turn: number;
  status: SessionStatus;
  kind: ResponseKind;
  text: string;
  lu_id: string;
  branches: Branch[];
}

export interface LuSummary {
  lu_id: string;
  header: string;
  lu_type: string;
  doc_id: string;
  score?: number;
}

export interface LuListing {
  total: number;
  items: LuSummary[];
}

export interface OutgoingEdge {
  branch_index: number;
  token: LinkerToken;
  condition: string;
  next_intent: string;
  target_lu_id: string | null;
}

export interface IncomingEdge {
  source_lu_id: string;
  branch_index: number;
  token: LinkerToken;
  condition: string;
}

export interface LuRecord {
  id: string;
  lu_type: string;
  header: string;
  body: string;
  prerequisite: string;
  linker: unknown[];
  default_parameters: Record<string, string>;
  meta: {
    source_doc_id: string;
    title: string;
    date: string;
    format_tag: string;
  };
}

export interface LuDetail {
  lu: LuRecord;
  outgoing: OutgoingEdge[];
  incoming: IncomingEdge[];
}

export interface SessionSnapshot {
  session_id: string;
  turn: number;
  status: SessionStatus;
  terminal: boolean;
  current_lu_id: string;
  question: string;
  transcript: Array<Record<string, unknown>>;
}

export interface ApiSpec {
  service: string;
  api_version: string;
  auth: "bearer" | "none";
  endpoints: Array<{ method: string; path: string; summary: string }>;
  session_statuses: SessionStatus[];
  response_kinds: ResponseKind[];
  linker_tokens: LinkerToken[];
}

// One color per linker token, shared by every edge rendering.
export const TOKEN_COLORS: Record<LinkerToken, string> = {
  CONTINUE: "#2563eb",
  CROSS: "#7c3aed",
  MITIGATE: "#059669",
};
