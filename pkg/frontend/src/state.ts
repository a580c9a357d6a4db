// Pure view-state derivation: every panel renders from structured payloads,
// never from prose, so the whole UI is testable without a DOM.

import type {
  ChatReply,
  DiagnosisPayload,
  DescriptionPayload,
  KeysPayload,
  PlanPayload,
  RecommendationPayload,
  SessionInfo,
  WarnPayload,
} from "./types.js";

export interface TranscriptEntry {
  who: "user" | "assistant" | "system" | "error";
  text: string;
}

export interface ModelLine {
  id: string;              // constraint name or "var.lower"/"var.upper"
  label: string;
  highlighted: boolean;    // member of the diagnosed conflict
}

export interface BadgeRow {
  param: string;
  value: string;
  badge: "adjustable" | "fixed" | "left-hand side";
  recommended: boolean;
}

export interface DiffRow {
  param: string;
  before: string;
  after: string;
}

export interface Banner {
  reason: string;
  consequence: string;
}

export interface ViewState {
  sessionId: string | null;
  phase: string;
  feasible: boolean;
  transcript: TranscriptEntry[];
  modelPanel: ModelLine[];
  highlightSet: string[];       // equals the diagnosis payload members
  recommendations: BadgeRow[];
  banner: Banner | null;
  paramDiff: DiffRow[] | null;
  busy: boolean;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    phase: "",
    feasible: false,
    transcript: [],
    modelPanel: [],
    highlightSet: [],
    recommendations: [],
    banner: null,
    paramDiff: null,
    busy: false,
  };
}

function say(state: ViewState, who: TranscriptEntry["who"], text: string): ViewState {
  return { ...state, transcript: [...state.transcript, { who, text }] };
}

export function applyCreated(state: ViewState, info: SessionInfo): ViewState {
  const next = {
    ...initialState(),
    sessionId: info.id,
    phase: info.phase,
    feasible: info.feasible,
  };
  const note = info.feasible
    ? `Loaded '${info.name}': the model is already feasible; chat is open.`
    : `Loaded '${info.name}': the model is infeasible; diagnosing.`;
  return say(next, "system", note);
}

export function applyResumed(state: ViewState, info: SessionInfo): ViewState {
  const next = {
    ...initialState(),
    sessionId: info.id,
    phase: info.phase,
    feasible: info.feasible,
  };
  return say(next, "system", `Resumed session for '${info.name}'.`);
}

export function applyHistory(state: ViewState, info: SessionInfo): ViewState {
  // Replay the recorded chat history into the transcript: tool messages and
  // raw tool-call records stay out of the human view.
  let next = state;
  for (const message of info.transcript ?? []) {
    if (message.role === "tool" || message.content.startsWith("[tool_call]")) continue;
    next = say(next, message.role === "user" ? "user" : "assistant", message.content);
  }
  if (info.pending) {
    next = { ...next, banner: { reason: info.pending.reason,
                                consequence: info.pending.consequence } };
  }
  return next;
}

function panelFromKeys(keys: KeysPayload, highlights: string[]): ModelLine[] {
  const set = new Set(highlights);
  const lines: ModelLine[] = keys.constraints.map((c) => ({
    id: c.name,
    label: c.description ? `${c.name} — ${c.description}` : c.name,
    highlighted: set.has(c.name),
  }));
  // bound members ("x.lower") highlight a synthetic line per bound id
  for (const member of highlights) {
    if (member.includes(".") && !lines.some((l) => l.id === member)) {
      lines.push({ id: member, label: `${member} (variable bound)`, highlighted: true });
    }
  }
  return lines;
}

export function applyDescription(state: ViewState, payload: DescriptionPayload): ViewState {
  const next = {
    ...state,
    phase: "Described",
    modelPanel: panelFromKeys(payload.keys, state.highlightSet),
  };
  return say(next, "assistant", payload.text);
}

export function applyDiagnosis(state: ViewState, payload: DiagnosisPayload | null): ViewState {
  if (payload === null) {
    return say({ ...state, highlightSet: [] }, "system",
               "Already feasible — nothing to diagnose.");
  }
  const highlightSet = [...payload.members];
  const next = {
    ...state,
    phase: "Diagnosed",
    highlightSet,
    modelPanel: state.modelPanel.length
      ? state.modelPanel
          .map((line) => ({ ...line, highlighted: highlightSet.includes(line.id) }))
          .concat(
            highlightSet
              .filter((m) => m.includes(".") && !state.modelPanel.some((l) => l.id === m))
              .map((m) => ({ id: m, label: `${m} (variable bound)`, highlighted: true })),
          )
      : state.modelPanel,
  };
  return say(next, "assistant", payload.text);
}

export function applyRecommendation(state: ViewState, payload: RecommendationPayload): ViewState {
  const rows: BadgeRow[] = [
    ...payload.candidates.map((c) => ({
      param: c.param,
      value: c.value,
      badge: "adjustable" as const,
      recommended: true,
    })),
    ...payload.discouraged.map((c) => ({
      param: c.param,
      value: c.value,
      badge: (c.side === "lhs" || c.side === "both"
        ? "left-hand side"
        : "fixed") as BadgeRow["badge"],
      recommended: false,
    })),
  ];
  return say({ ...state, recommendations: rows }, "assistant", payload.text);
}

export function applyUserMessage(state: ViewState, text: string): ViewState {
  return say({ ...state, busy: true }, "user", text);
}

export function applyChatReply(state: ViewState, reply: ChatReply): ViewState {
  const banner = reply.pending_confirmation
    ? { reason: "confirmation required", consequence: reply.reply }
    : null;
  return say({ ...state, busy: false, banner }, "assistant", reply.reply);
}

export function applyRepairWarning(state: ViewState, warn: WarnPayload): ViewState {
  const banner = { reason: warn.reason, consequence: warn.consequence };
  return say({ ...state, busy: false, banner }, "system",
             `Warning (${warn.reason}): ${warn.consequence}`);
}

export function applyPlan(state: ViewState, plan: PlanPayload): ViewState {
  const diff: DiffRow[] = (plan.recommendations ?? []).map((r) => ({
    param: r.param,
    before: r.old,
    after: r.new,
  }));
  const summary = plan.status === "already_feasible"
    ? "The model is already feasible; no change needed."
    : `Minimal total change ${plan.total}.`;
  return say({ ...state, busy: false, banner: null, paramDiff: diff.length ? diff : null },
             "assistant", summary);
}

export function clearBanner(state: ViewState): ViewState {
  return { ...state, banner: null, busy: false };
}

export function applyBusyRejection(state: ViewState): ViewState {
  // the service answered 429: the previous turn is still running
  return say({ ...state, busy: false }, "system", "Still thinking — try again in a moment.");
}

export function applyError(state: ViewState, message: string): ViewState {
  return say({ ...state, busy: false }, "error", message);
}
