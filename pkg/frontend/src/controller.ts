// Session controller: the upload -> describe -> diagnose opening sequence,
// chat turns, and the gated-confirm flow. DOM-free; the app layer only
// renders the ViewState this produces.

import { ServiceClient, ServiceError } from "./api.js";
import {
  applyBusyRejection,
  applyChatReply,
  applyCreated,
  applyDescription,
  applyDiagnosis,
  applyError,
  applyPlan,
  applyRecommendation,
  applyHistory,
  applyRepairWarning,
  applyResumed,
  applyUserMessage,
  clearBanner,
  initialState,
  ViewState,
} from "./state.js";
import type { ParseErrorEntry } from "./types.js";

export type Listener = (state: ViewState) => void;

export class Controller {
  state: ViewState = initialState();

  constructor(
    private client: ServiceClient,
    private listener: Listener = () => {},
  ) {}

  private set(state: ViewState) {
    this.state = state;
    this.listener(state);
  }

  /** POST the model source, then render description and diagnosis. */
  async uploadAndStart(source: string, format: "text" | "structured" = "text"): Promise<void> {
    try {
      const info = await this.client.createSession(source, format);
      this.set(applyCreated(this.state, info));
    } catch (error) {
      this.set(applyError(this.state, describeError(error)));
      return;
    }
    const id = this.state.sessionId!;
    try {
      this.set(applyDescription(this.state, await this.client.description(id)));
      this.set(applyDiagnosis(this.state, await this.client.diagnosis(id)));
      if (!this.state.feasible) {
        this.set(applyRecommendation(this.state, await this.client.recommendation(id)));
      }
    } catch (error) {
      this.set(applyError(this.state, describeError(error)));
    }
  }

  /** Rebuild the whole view for an existing session (page refresh). */
  async resume(id: string): Promise<void> {
    try {
      const info = await this.client.getSession(id);
      this.set(applyResumed(this.state, info));
      this.set(applyDescription(this.state, await this.client.description(id)));
      this.set(applyDiagnosis(this.state, await this.client.diagnosis(id)));
      if (!this.state.feasible) {
        this.set(applyRecommendation(this.state, await this.client.recommendation(id)));
      }
      this.set(applyHistory(this.state, info));
    } catch (error) {
      this.set(applyError(this.state, describeError(error)));
    }
  }

  async sendMessage(text: string): Promise<void> {
    if (this.state.sessionId === null || this.state.busy) return;
    this.set(applyUserMessage(this.state, text));
    try {
      const reply = await this.client.chat(this.state.sessionId, text);
      this.set(applyChatReply(this.state, reply));
    } catch (error) {
      if (error instanceof ServiceError && error.status === 429) {
        this.set(applyBusyRejection(this.state));
        return;
      }
      this.set(applyError(this.state, describeError(error)));
    }
  }

  /** Ask for a repair over chosen parameters; a 202 raises the banner. */
  async requestRepair(params: string[], mode: "tied" | "entry" = "tied"): Promise<void> {
    if (this.state.sessionId === null) return;
    try {
      const outcome = await this.client.repair(this.state.sessionId, params, mode);
      if (outcome.kind === "warn") {
        this.set(applyRepairWarning(this.state, outcome.warn));
      } else {
        this.set(applyPlan(this.state, outcome.plan));
      }
    } catch (error) {
      this.set(applyError(this.state, describeError(error)));
    }
  }

  /** The banner's Confirm button. */
  async confirmGated(): Promise<void> {
    if (this.state.sessionId === null || this.state.banner === null) return;
    try {
      const plan = await this.client.confirm(this.state.sessionId);
      this.set(applyPlan(this.state, plan));
    } catch (error) {
      this.set(applyError(this.state, describeError(error)));
    }
  }

  /** The banner's Cancel button: clears locally, no model change. */
  cancelGated(): void {
    this.set(clearBanner(this.state));
  }

  async refreshModel(): Promise<string | null> {
    if (this.state.sessionId === null) return null;
    return this.client.modelText(this.state.sessionId);
  }
}

export function describeError(error: unknown): string {
  if (error instanceof ServiceError) {
    if (error.body.code === "parse_error") {
      const lines = (error.body.details as ParseErrorEntry[])
        .map((d) => `line ${d.line}, column ${d.column}: ${d.message}`);
      return `The model did not parse:\n${lines.join("\n")}`;
    }
    if (error.status >= 500) {
      return `${error.body.message} (retriable)`;
    }
    return error.body.message;
  }
  return `network failure: ${String(error)} (retriable)`;
}
