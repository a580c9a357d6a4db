// Wire shapes of the diagnosis service. Rationals are strings ("7/2").

export interface HistoryMessage {
  role: "user" | "assistant" | "tool";
  content: string;
}

export interface PendingInfo {
  tool: string;
  args: Record<string, unknown>;
  reason: string;
  consequence: string;
}

export interface SessionInfo {
  id: string;
  phase: string;
  feasible: boolean;
  name: string;
  created: number;
  updated: number;
  pending_confirmation: boolean;
  transcript?: HistoryMessage[];   // present on GET /sessions/{id}
  pending?: PendingInfo | null;
}

export interface KeyParam {
  name: string;
  description: string | null;
  mutable: boolean;
}

export interface KeysPayload {
  params: KeyParam[];
  vars: { name: string; kind: string }[];
  constraints: { name: string; description: string | null }[];
}

export interface DescriptionPayload {
  text: string;
  keys: KeysPayload;
}

export interface DiagnosisPayload {
  text: string;
  members: string[];
  rows: number[];
  method: string;
  solver_calls: number;
}

export interface CandidateEntry {
  param: string;
  value: string;
  mutable: boolean;
  side: string;
  reason?: string;
}

export interface RecommendationPayload {
  text: string;
  candidates: CandidateEntry[];
  discouraged: CandidateEntry[];
}

export interface ChatReply {
  reply: string;
  tool_calls: string[];
  pending_confirmation: boolean;
}

export interface RecommendationRow {
  param: string;
  old: string;
  new: string;
  direction: string;
  phrase: string;
}

export interface PlanPayload {
  status: string;
  mode: string;
  total: string;
  entry_slacks: Record<string, string>;
  param_deltas: Record<string, string>;
  witness: Record<string, string>;
  targets: string[];
  recommendations?: RecommendationRow[];
}

export interface WarnPayload {
  code: "confirmation_required";
  reason: string;
  consequence: string;
}

export interface ParseErrorEntry {
  line: number;
  column: number;
  length: number;
  kind: string;
  message: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: ParseErrorEntry[] | unknown[];
}
