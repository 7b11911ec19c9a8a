/**
 * HTML renderers for the console. Pure string builders: every view is a
 * function of API response data, so the exact markup is testable without
 * a browser. No navigation logic lives here or anywhere else client-side —
 * the server decides every transition.
 */

import type { TranscriptEntry } from "./chat.js";
import { isStayHop, type TurnGroup } from "./timeline.js";
import type { Hop, IngestReport, SessionInfo, Usage } from "./types.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#039;");
}

// -- chips --------------------------------------------------------------

export function renderUsageChips(usage: Usage, latencyMs: number): string {
  const approx = usage.estimated ? "~" : "";
  return (
    `<span class="chip chip--tokens">${approx}${usage.input_tokens}&rarr;${usage.output_tokens} tok</span>` +
    `<span class="chip chip--latency">${latencyMs} ms</span>`
  );
}

export function renderNodeBadge(node: string): string {
  return `<span class="node-badge">${escapeHtml(node)}</span>`;
}

// -- session header -----------------------------------------------------

export function renderSessionHeader(info: SessionInfo): string {
  return `
  <div class="session-header">
    <span class="session-header__id">session ${escapeHtml(info.session_id)}</span>
    <span class="session-header__tree">${escapeHtml(info.tree_id)} v${info.tree_version}</span>
    <span class="session-header__node">at ${renderNodeBadge(info.current_node)}</span>
  </div>`;
}

// -- transcript ---------------------------------------------------------

export function renderTranscript(entries: TranscriptEntry[]): string {
  if (entries.length === 0) {
    return `<div class="empty-state">No messages yet. Say something below.</div>`;
  }
  return entries.map(renderEntry).join("\n");
}

function renderEntry(entry: TranscriptEntry): string {
  if (entry.kind === "user") {
    const pending = entry.pending ? " bubble--pending" : "";
    return `
  <div class="bubble bubble--user${pending}">
    <div class="bubble__text">${escapeHtml(entry.text)}</div>
    ${entry.pending ? `<div class="bubble__status">sending&hellip;</div>` : ""}
  </div>`;
  }
  return `
  <div class="bubble bubble--agent" data-turn="${entry.turn}">
    <div class="bubble__text">${escapeHtml(entry.text)}</div>
    <div class="bubble__meta">
      ${renderNodeBadge(entry.finalNode)}
      ${renderUsageChips(entry.usage, entry.latencyMs)}
    </div>
  </div>`;
}

// -- hop timeline -------------------------------------------------------

export function renderTimeline(groups: TurnGroup[]): string {
  if (groups.length === 0) {
    return `<div class="empty-state">No hops recorded yet.</div>`;
  }
  return groups.map(renderTurnGroup).join("\n");
}

export function renderTurnGroup(group: TurnGroup): string {
  if (group.terminal) {
    return `
  <div class="turn-group turn-group--terminal" data-turn="${group.turn}">
    <div class="turn-group__header">turn ${group.turn}
      <span class="turn-group__label">terminal</span>
    </div>
    <div class="turn-group__note">Terminal node: no evaluation, reply generated directly.</div>
  </div>`;
  }
  const rows = group.hops.map(renderHopRow).join("\n");
  return `
  <div class="turn-group" data-turn="${group.turn}">
    <div class="turn-group__header">turn ${group.turn}</div>
    ${rows}
  </div>`;
}

function renderHopRow(hop: Hop): string {
  const stay = isStayHop(hop);
  const move = stay
    ? `${renderNodeBadge(hop.from_node)} <span class="hop-row__stay">stay</span>`
    : `${renderNodeBadge(hop.from_node)} &rarr; ${renderNodeBadge(hop.to_node)}`;
  return `
    <div class="hop-row${stay ? " hop-row--stay" : ""}">
      <div class="hop-row__move">${move}
        <span class="hop-row__chosen">${escapeHtml(hop.chosen)}</span>
        ${renderUsageChips(hop.usage, hop.latency_ms)}
      </div>
      <details class="hop-row__scratchpad">
        <summary>reasoning</summary>
        <pre>${escapeHtml(hop.scratchpad)}</pre>
      </details>
    </div>`;
}

// -- validation report --------------------------------------------------

export function renderValidationReport(report: IngestReport): string {
  const status = report.validation.is_valid
    ? `<div class="report-status report-status--ok">stored as ${escapeHtml(report.tree_id)} v${report.version} (${report.edge_count} edges)</div>`
    : `<div class="report-status report-status--rejected">rejected: ${escapeHtml(report.tree_id)} has structural defects (${report.edge_count} edges parsed)</div>`;

  const sections: string[] = [status];

  if (report.validation.orphans.length) {
    const items = report.validation.orphans.map((n) => renderNodeBadge(n)).join(" ");
    sections.push(`<div class="report-section"><h4>Orphan nodes</h4>${items}</div>`);
  }
  if (report.validation.dangling_edges.length) {
    const items = report.validation.dangling_edges
      .map(([key, node]) => `<li><code>${escapeHtml(key)}</code> &rarr; ${renderNodeBadge(node)}</li>`)
      .join("");
    sections.push(`<div class="report-section"><h4>Dangling edges</h4><ul>${items}</ul></div>`);
  }
  if (report.validation.unescapable_loops.length) {
    const loops = report.validation.unescapable_loops
      .map(
        (loop) =>
          `<li class="loop-set">{ ${loop.map((n) => renderNodeBadge(n)).join(", ")} }</li>`,
      )
      .join("");
    sections.push(
      `<div class="report-section report-section--loops"><h4>Unescapable loops</h4><ul>${loops}</ul></div>`,
    );
  }
  if (report.warnings.length) {
    const items = report.warnings.map((w) => `<li>${escapeHtml(w)}</li>`).join("");
    sections.push(`<div class="report-section"><h4>Warnings</h4><ul>${items}</ul></div>`);
  }
  return sections.join("\n");
}

// -- banners ------------------------------------------------------------

export function renderBanners(sendLocked: boolean, retryBanner: string | null): string {
  const parts: string[] = [];
  if (sendLocked) {
    parts.push(
      `<div class="banner banner--busy">A turn is already in flight for this session. ` +
        `Sending is disabled. <button id="retry-btn">Try again</button></div>`,
    );
  }
  if (retryBanner !== null) {
    parts.push(
      `<div class="banner banner--error">${escapeHtml(retryBanner)} ` +
        `<button id="retry-btn">Retry</button></div>`,
    );
  }
  return parts.join("\n");
}
