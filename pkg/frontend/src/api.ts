// Thin typed client over the service HTTP API.
//
// The fetch function is injected so tests can script the whole service;
// only a structural subset of the fetch contract is required.

import type {
  ApiErrorBody,
  ChatReply,
  DescriptionPayload,
  DiagnosisPayload,
  PlanPayload,
  RecommendationPayload,
  SessionInfo,
  WarnPayload,
} from "./types.js";

export interface FetchResponse {
  status: number;
  json(): Promise<unknown>;
  text(): Promise<string>;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<FetchResponse>;

export class ServiceError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

async function asError(response: FetchResponse): Promise<ServiceError> {
  let body: ApiErrorBody;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    body = { code: "bad_reply", message: `HTTP ${response.status}`, details: [] };
  }
  return new ServiceError(response.status, body);
}

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown,
                           okStatuses: number[] = [200, 201, 202]): Promise<{ status: number; payload: T }> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!okStatuses.includes(response.status)) {
      throw await asError(response);
    }
    return { status: response.status, payload: (await response.json()) as T };
  }

  async createSession(source: string, format: "text" | "structured"): Promise<SessionInfo> {
    const { payload } = await this.request<SessionInfo>(
      "POST", "/sessions", { source, format }, [201]);
    return payload;
  }

  async getSession(id: string): Promise<SessionInfo> {
    return (await this.request<SessionInfo>("GET", `/sessions/${id}`)).payload;
  }

  async description(id: string): Promise<DescriptionPayload> {
    return (await this.request<DescriptionPayload>(
      "GET", `/sessions/${id}/description`)).payload;
  }

  async diagnosis(id: string): Promise<DiagnosisPayload | null> {
    // null means "already feasible": a notice, not an error
    const response = await this.fetchFn(`${this.baseUrl}/sessions/${id}/diagnosis`, { method: "GET" });
    if (response.status === 409) return null;
    if (response.status !== 200) throw await asError(response);
    return (await response.json()) as DiagnosisPayload;
  }

  async recommendation(id: string): Promise<RecommendationPayload> {
    return (await this.request<RecommendationPayload>(
      "GET", `/sessions/${id}/recommendation`)).payload;
  }

  async chat(id: string, message: string): Promise<ChatReply> {
    return (await this.request<ChatReply>(
      "POST", `/sessions/${id}/chat`, { message }, [200])).payload;
  }

  async repair(id: string, params: string[], mode: "tied" | "entry" = "tied"):
      Promise<{ kind: "plan"; plan: PlanPayload } | { kind: "warn"; warn: WarnPayload }> {
    const { status, payload } = await this.request<PlanPayload | WarnPayload>(
      "POST", `/sessions/${id}/repair`, { params, mode }, [200, 202]);
    if (status === 202) return { kind: "warn", warn: payload as WarnPayload };
    return { kind: "plan", plan: payload as PlanPayload };
  }

  async confirm(id: string): Promise<PlanPayload> {
    return (await this.request<PlanPayload>(
      "POST", `/sessions/${id}/repair/confirm`, undefined, [200])).payload;
  }

  async modelText(id: string): Promise<string> {
    const response = await this.fetchFn(`${this.baseUrl}/sessions/${id}/model`, { method: "GET" });
    if (response.status !== 200) throw await asError(response);
    return response.text();
  }
}
