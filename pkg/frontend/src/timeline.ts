/**
 * Grouping of raw trace hops into per-turn units for display.
 *
 * A turn that recorded zero hops ran at a terminal node — evaluation is
 * skipped there, so nothing reaches the trace. The timeline shows those
 * turns as explicit zero-hop groups instead of hiding them.
 */

import { STAY, type Hop, type TraceHop } from "./types.js";

export interface TurnGroup {
  turn: number;
  hops: Hop[];
  terminal: boolean; // true iff the turn recorded no hops
}

export function isStayHop(hop: Hop): boolean {
  return hop.chosen === STAY;
}

/** Group trace hops by turn number, preserving hop order within each turn. */
export function groupTraceHops(hops: TraceHop[]): TurnGroup[] {
  const byTurn = new Map<number, Hop[]>();
  for (const { turn, ...hop } of hops) {
    const bucket = byTurn.get(turn);
    if (bucket) {
      bucket.push(hop);
    } else {
      byTurn.set(turn, [hop]);
    }
  }
  return [...byTurn.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([turn, turnHops]) => ({ turn, hops: turnHops, terminal: false }));
}

/**
 * Timeline for a session with `turnCount` completed turns: one group per
 * turn in order. Turns absent from the trace get a terminal zero-hop group.
 */
export function buildTimeline(turnCount: number, hops: TraceHop[]): TurnGroup[] {
  const grouped = new Map(groupTraceHops(hops).map((g) => [g.turn, g]));
  const out: TurnGroup[] = [];
  for (let turn = 1; turn <= turnCount; turn++) {
    out.push(grouped.get(turn) ?? { turn, hops: [], terminal: true });
  }
  return out;
}

/** Re-attach turn numbers; inverse of groupTraceHops for non-terminal groups. */
export function flattenTimeline(groups: TurnGroup[]): TraceHop[] {
  const out: TraceHop[] = [];
  for (const group of groups) {
    for (const hop of group.hops) {
      out.push({ turn: group.turn, ...hop });
    }
  }
  return out;
}

/**
 * Rebuild the timeline from the server trace alone, e.g. after a reload.
 * Terminal turns record no hops, so the replay contains exactly the turns
 * with at least one hop — everything the server exposes. `finalNode` is
 * where the recorded hops leave the session (null for an empty trace);
 * terminal turns never move the session, so it matches the live node.
 */
export function replayTrace(hops: TraceHop[]): { groups: TurnGroup[]; finalNode: string | null } {
  const groups = groupTraceHops(hops);
  const last = hops.at(-1);
  return { groups, finalNode: last ? last.to_node : null };
}
