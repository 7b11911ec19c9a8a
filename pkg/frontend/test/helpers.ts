/**
 * Scripted fetch for tests: an ordered queue of canned responses, matched
 * strictly against method + path so misrouted requests fail loudly.
 */

import type {
  Hop,
  IngestReport,
  SessionInfo,
  TraceHop,
  TurnResult,
  Usage,
} from "../src/types.js";

interface Scripted {
  method: string;
  path: string;
  status: number;
  body: unknown;
  gate?: Promise<void>;
}

export interface CapturedRequest {
  method: string;
  path: string;
  body: unknown;
  headers: Record<string, string>;
}

export class ScriptedServer {
  readonly requests: CapturedRequest[] = [];
  private queue: Scripted[] = [];

  enqueue(method: string, path: string, status: number, body: unknown): void {
    this.queue.push({ method, path, status, body });
  }

  /** Like enqueue, but the response is held until the returned release fires. */
  enqueueGated(method: string, path: string, status: number, body: unknown): () => void {
    let release!: () => void;
    const gate = new Promise<void>((resolve) => {
      release = resolve;
    });
    this.queue.push({ method, path, status, body, gate });
    return release;
  }

  get pending(): number {
    return this.queue.length;
  }

  readonly fetch: typeof fetch = async (input, init) => {
    const url = typeof input === "string" ? input : input instanceof URL ? input.href : input.url;
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const headers: Record<string, string> = {};
    const rawHeaders = (init?.headers ?? {}) as Record<string, string>;
    for (const [k, v] of Object.entries(rawHeaders)) headers[k.toLowerCase()] = v;
    this.requests.push({
      method,
      path,
      body: init?.body ? JSON.parse(init.body as string) : undefined,
      headers,
    });

    const next = this.queue.shift();
    if (!next) throw new Error(`scripted server exhausted: ${method} ${path}`);
    if (next.method !== method || next.path !== path) {
      throw new Error(
        `scripted server expected ${next.method} ${next.path}, got ${method} ${path}`,
      );
    }
    if (next.gate) await next.gate;
    return new Response(JSON.stringify(next.body), {
      status: next.status,
      headers: { "content-type": "application/json" },
    });
  };
}

// -- document factories ---------------------------------------------------

export function mkUsage(overrides: Partial<Usage> = {}): Usage {
  return { input_tokens: 120, output_tokens: 18, estimated: false, ...overrides };
}

export function mkHop(overrides: Partial<Hop> = {}): Hop {
  return {
    from_node: "A",
    chosen: "t1",
    to_node: "B",
    scratchpad: "user confirmed the symptom",
    usage: mkUsage(),
    latency_ms: 250,
    ...overrides,
  };
}

export function mkTraceHop(turn: number, overrides: Partial<Hop> = {}): TraceHop {
  return { turn, ...mkHop(overrides) };
}

export function mkTurnResult(overrides: Partial<TurnResult> = {}): TurnResult {
  return {
    strategy: "arbor",
    final_node: "B",
    hops: [mkHop()],
    message: "Does it get worse at night?",
    generation_reasoning: "asking the follow-up for node B",
    total_usage: mkUsage({ input_tokens: 240, output_tokens: 40 }),
    total_latency_ms: 600,
    ...overrides,
  };
}

export function mkSession(overrides: Partial<SessionInfo> = {}): SessionInfo {
  return {
    session_id: "s-1",
    tree_id: "demo",
    tree_version: 1,
    current_node: "A",
    ...overrides,
  };
}

export function mkReport(overrides: Partial<IngestReport> = {}): IngestReport {
  return {
    tree_id: "demo",
    version: 1,
    edge_count: 3,
    warnings: [],
    validation: {
      is_valid: true,
      orphans: [],
      dangling_edges: [],
      unescapable_loops: [],
    },
    ...overrides,
  };
}
