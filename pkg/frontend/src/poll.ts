/** Polls the trace endpoint once a second and reports changed responses. */

import type { ConsoleApi } from "./api.js";
import type { TraceResponse } from "./types.js";

export class TracePoller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastSerialized = "";

  constructor(
    private readonly api: ConsoleApi,
    private readonly sessionId: string,
    private readonly onTrace: (trace: TraceResponse) => void,
    private readonly intervalMs = 1000,
  ) {}

  start(): void {
    if (this.timer) return;
    this.timer = setInterval(() => {
      void this.tick();
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async tick(): Promise<void> {
    let trace: TraceResponse;
    try {
      trace = await this.api.getTrace(this.sessionId);
    } catch {
      return; // transient failure: keep the last rendered trace, retry next tick
    }
    const serialized = JSON.stringify(trace);
    if (serialized !== this.lastSerialized) {
      this.lastSerialized = serialized;
      this.onTrace(trace);
    }
  }
}
