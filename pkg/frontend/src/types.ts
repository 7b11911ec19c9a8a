/**
 * Wire types for the treenav HTTP API.
 *
 * Field names mirror the service JSON exactly — the console is a viewer
 * over these documents and never invents state of its own.
 */

export interface Usage {
  input_tokens: number;
  output_tokens: number;
  estimated: boolean;
}

/** One evaluation step inside a turn: an edge traversal or a stay. */
export interface Hop {
  from_node: string;
  chosen: string; // "stay" or a transition key
  to_node: string;
  scratchpad: string;
  usage: Usage;
  latency_ms: number;
}

/** Trace entries add the 1-based turn counter the hop was recorded under. */
export interface TraceHop extends Hop {
  turn: number;
}

export interface TurnResult {
  strategy: "arbor";
  final_node: string;
  hops: Hop[];
  message: string;
  generation_reasoning: string;
  total_usage: Usage;
  total_latency_ms: number;
}

export interface BaselineResult {
  strategy: "baseline";
  final_node: string;
  claimed_node: string;
  node_valid: boolean;
  message: string;
  total_usage: Usage;
  total_latency_ms: number;
}

export interface SessionInfo {
  session_id: string;
  tree_id: string;
  tree_version: number;
  current_node: string;
}

export interface TraceResponse {
  session_id: string;
  hops: TraceHop[];
}

export interface ValidationReport {
  is_valid: boolean;
  orphans: string[];
  dangling_edges: [string, string][];
  unescapable_loops: string[][];
}

export interface IngestReport {
  tree_id: string;
  version: number | null; // null when structural defects blocked storage
  edge_count: number;
  warnings: string[];
  validation: ValidationReport;
}

export const STAY = "stay";
