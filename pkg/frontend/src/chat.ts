/**
 * Chat panel state machine. No DOM in here — send ordering, optimistic
 * echo reconciliation, and error surfaces are all testable against a
 * scripted fetch.
 *
 * The server allows one turn in flight per session, so the panel
 * dispatches one POST at a time and queues anything sent meanwhile.
 */

import { ApiError, type ConsoleApi } from "./api.js";
import type { Hop, Usage } from "./types.js";

export type TranscriptEntry =
  | { kind: "user"; text: string; pending: boolean }
  | {
      kind: "agent";
      turn: number;
      text: string;
      finalNode: string;
      hops: Hop[];
      usage: Usage;
      latencyMs: number;
    };

export class ChatPanel {
  readonly transcript: TranscriptEntry[] = [];
  /** 409 from the server: a turn is already in flight for this session. */
  sendLocked = false;
  /** Message for the retry banner after a 5xx or network failure. */
  retryBanner: string | null = null;
  turnCount = 0;

  private queue: string[] = [];
  private inFlight = false;

  constructor(
    private readonly api: ConsoleApi,
    private readonly sessionId: string,
    private readonly onChange: () => void = () => {},
  ) {}

  get busy(): boolean {
    return this.inFlight || this.queue.length > 0;
  }

  /**
   * Queue a message. The optimistic echo appears immediately and is
   * reconciled (pending flag cleared) when the server confirms the turn.
   */
  send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || this.sendLocked) return Promise.resolve();
    this.transcript.push({ kind: "user", text: trimmed, pending: true });
    this.queue.push(trimmed);
    this.onChange();
    return this.pump();
  }

  /** Clear error surfaces and re-dispatch whatever is still queued. */
  retry(): Promise<void> {
    this.sendLocked = false;
    this.retryBanner = null;
    this.onChange();
    return this.pump();
  }

  private async pump(): Promise<void> {
    if (this.inFlight || this.sendLocked) return;
    const text = this.queue[0];
    if (text === undefined) return;
    this.inFlight = true;
    try {
      const result = await this.api.sendMessage(this.sessionId, text);
      this.queue.shift();
      this.reconcile(text);
      this.turnCount += 1;
      this.transcript.push({
        kind: "agent",
        turn: this.turnCount,
        text: result.message,
        finalNode: result.final_node,
        hops: result.strategy === "arbor" ? result.hops : [],
        usage: result.total_usage,
        latencyMs: result.total_latency_ms,
      });
      this.retryBanner = null;
    } catch (err) {
      // failed text stays at the queue head; retry() re-dispatches it
      if (err instanceof ApiError && err.status === 409) {
        this.sendLocked = true;
      } else {
        this.retryBanner = err instanceof Error ? err.message : String(err);
      }
    } finally {
      this.inFlight = false;
      this.onChange();
    }
    if (!this.sendLocked && this.retryBanner === null) {
      await this.pump();
    }
  }

  private reconcile(text: string): void {
    const echo = this.transcript.find(
      (e) => e.kind === "user" && e.pending && e.text === text,
    );
    if (echo && echo.kind === "user") echo.pending = false;
  }
}
