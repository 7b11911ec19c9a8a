/**
 * Thin typed client for the treenav service. Each method maps to exactly
 * one endpoint and returns the response JSON unchanged.
 */

import type {
  BaselineResult,
  IngestReport,
  SessionInfo,
  TraceResponse,
  TurnResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ApiConfig {
  baseUrl?: string;
  authToken?: string;
  fetchImpl?: typeof fetch;
}

export interface TreeUpload {
  source: string;
  format: "json" | "csv";
  tree_id?: string;
  entry?: string;
}

export class ConsoleApi {
  private readonly baseUrl: string;
  private readonly authToken: string;
  private readonly fetchImpl: typeof fetch;

  constructor(config: ApiConfig = {}) {
    this.baseUrl = (config.baseUrl ?? "").replace(/\/+$/, "");
    this.authToken = config.authToken ?? "";
    // bind so a bare `fetch` keeps its global receiver in browsers
    this.fetchImpl = config.fetchImpl ?? fetch.bind(globalThis);
  }

  private request(method: string, path: string, body?: unknown): Promise<Response> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (this.authToken) headers["authorization"] = `Bearer ${this.authToken}`;
    return this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  private async fail(res: Response): Promise<never> {
    let code = "http_error";
    let message = `HTTP ${res.status}`;
    try {
      const doc: unknown = await res.json();
      if (doc && typeof doc === "object") {
        const err = doc as { code?: unknown; message?: unknown; detail?: unknown };
        if (typeof err.code === "string") code = err.code;
        if (typeof err.message === "string") message = err.message;
        else if (err.detail !== undefined) message = JSON.stringify(err.detail);
      }
    } catch {
      // non-JSON body: keep the bare status line
    }
    throw new ApiError(res.status, code, message);
  }

  /**
   * Upload a tree source. A 422 carrying a validation report (the tree
   * parsed but has structural defects) still resolves, with version null;
   * parse failures and everything else reject with ApiError.
   */
  async uploadTree(body: TreeUpload): Promise<IngestReport> {
    const res = await this.request("POST", "/trees", body);
    if (res.status === 202) return (await res.json()) as IngestReport;
    if (res.status === 422) {
      const doc: unknown = await res.json();
      if (doc && typeof doc === "object" && "validation" in doc) {
        return doc as IngestReport;
      }
      const err = doc as { code?: string; message?: string };
      throw new ApiError(422, err.code ?? "http_error", err.message ?? "invalid tree source");
    }
    return this.fail(res);
  }

  async createSession(
    treeId: string,
    options: { version?: number; externalContext?: Record<string, string> } = {},
  ): Promise<SessionInfo> {
    const res = await this.request("POST", "/sessions", {
      tree_id: treeId,
      version: options.version ?? null,
      external_context: options.externalContext ?? {},
    });
    if (!res.ok) return this.fail(res);
    return (await res.json()) as SessionInfo;
  }

  async sendMessage(
    sessionId: string,
    text: string,
    strategy: "arbor" | "baseline" = "arbor",
  ): Promise<TurnResult | BaselineResult> {
    const res = await this.request(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/messages`,
      { text, strategy },
    );
    if (!res.ok) return this.fail(res);
    return (await res.json()) as TurnResult | BaselineResult;
  }

  async getTrace(sessionId: string): Promise<TraceResponse> {
    const res = await this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/trace`);
    if (!res.ok) return this.fail(res);
    return (await res.json()) as TraceResponse;
  }

  async getSession(sessionId: string): Promise<SessionInfo> {
    const res = await this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
    if (!res.ok) return this.fail(res);
    return (await res.json()) as SessionInfo;
  }
}
