import { describe, expect, it } from "vitest";

import type { TranscriptEntry } from "../src/chat.js";
import {
  escapeHtml,
  renderBanners,
  renderSessionHeader,
  renderTimeline,
  renderTranscript,
  renderUsageChips,
  renderValidationReport,
} from "../src/render.js";
import { buildTimeline, groupTraceHops } from "../src/timeline.js";
import { mkHop, mkReport, mkSession, mkTraceHop, mkUsage } from "./helpers.js";

describe("timeline rendering", () => {
  it("renders a turn with [A->B, B stay] as two rows with the stay flagged", () => {
    const groups = groupTraceHops([
      mkTraceHop(1, { from_node: "A", chosen: "t1", to_node: "B" }),
      mkTraceHop(1, { from_node: "B", chosen: "stay", to_node: "B" }),
    ]);

    const html = renderTimeline(groups);

    expect(html.match(/hop-row__move/g)).toHaveLength(2); // one per hop
    expect(html.match(/hop-row--stay/g)).toHaveLength(1);
    expect(html).toContain("turn 1");
    expect(html).toContain("t1");
  });

  it("labels a zero-hop turn as terminal", () => {
    const html = renderTimeline(buildTimeline(1, []));

    expect(html).toContain("turn-group--terminal");
    expect(html).toContain(">terminal<");
    expect(html).not.toContain("hop-row");
  });

  it("renders an explicit empty state for an empty trace", () => {
    expect(renderTimeline([])).toContain("No hops recorded yet");
  });

  it("shows the scratchpad text, escaped", () => {
    const groups = groupTraceHops([
      mkTraceHop(1, { scratchpad: 'chose <b>yes</b> because "pain" was confirmed' }),
    ]);

    const html = renderTimeline(groups);

    expect(html).toContain("chose &lt;b&gt;yes&lt;/b&gt;");
    expect(html).not.toContain("<b>yes</b>");
  });
});

describe("chips", () => {
  it("prefixes estimated token counts with a tilde", () => {
    expect(renderUsageChips(mkUsage({ estimated: true }), 100)).toContain("~120");
    expect(renderUsageChips(mkUsage({ estimated: false }), 100)).not.toContain("~");
  });

  it("includes the latency in milliseconds", () => {
    expect(renderUsageChips(mkUsage(), 432)).toContain("432 ms");
  });
});

describe("transcript rendering", () => {
  it("renders messages in order with speaker classes", () => {
    const entries: TranscriptEntry[] = [
      { kind: "user", text: "hello there", pending: false },
      {
        kind: "agent",
        turn: 1,
        text: "hi, any pain?",
        finalNode: "B",
        hops: [mkHop()],
        usage: mkUsage(),
        latencyMs: 100,
      },
    ];

    const html = renderTranscript(entries);

    expect(html.indexOf("hello there")).toBeLessThan(html.indexOf("hi, any pain?"));
    expect(html).toContain("bubble--user");
    expect(html).toContain("bubble--agent");
    expect(html).toContain(">B</span>"); // final-node badge on the reply
  });

  it("marks unreconciled echoes as pending", () => {
    const html = renderTranscript([{ kind: "user", text: "hi", pending: true }]);
    expect(html).toContain("bubble--pending");
    expect(html).toContain("sending");
  });

  it("escapes user-supplied text", () => {
    const html = renderTranscript([
      { kind: "user", text: "<script>alert(1)</script>", pending: false },
    ]);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("validation report rendering", () => {
  it("shows each unescapable loop as a node set", () => {
    const report = mkReport({
      version: null,
      validation: {
        is_valid: false,
        orphans: ["Z"],
        dangling_edges: [["t9", "ghost"]],
        unescapable_loops: [
          ["A", "B"],
          ["C", "D", "E"],
        ],
      },
    });

    const html = renderValidationReport(report);

    expect(html).toContain("rejected");
    expect(html).toContain("Unescapable loops");
    expect(html.match(/class="loop-set"/g)).toHaveLength(2);
    for (const node of ["A", "B", "C", "D", "E", "Z", "ghost"]) {
      expect(html).toContain(`>${node}</span>`);
    }
  });

  it("reports the stored version for a clean tree", () => {
    const html = renderValidationReport(mkReport());
    expect(html).toContain("stored as demo v1");
    expect(html).not.toContain("Unescapable loops");
  });
});

describe("banners and header", () => {
  it("renders the disabled-send notice when a turn is in flight", () => {
    const html = renderBanners(true, null);
    expect(html).toContain("banner--busy");
    expect(html).toContain("disabled");
  });

  it("renders the retry banner with the error text", () => {
    const html = renderBanners(false, "model endpoint returned 500");
    expect(html).toContain("banner--error");
    expect(html).toContain("model endpoint returned 500");
    expect(html).toContain("retry-btn");
  });

  it("renders nothing when there is no trouble", () => {
    expect(renderBanners(false, null)).toBe("");
  });

  it("shows the session id and current-node badge", () => {
    const html = renderSessionHeader(mkSession({ current_node: "n042" }));
    expect(html).toContain("s-1");
    expect(html).toContain(">n042</span>");
  });
});

describe("escapeHtml", () => {
  it("escapes the five significant characters", () => {
    expect(escapeHtml(`<a href="x" title='y'> & </a>`)).toBe(
      "&lt;a href=&quot;x&quot; title=&#039;y&#039;&gt; &amp; &lt;/a&gt;",
    );
  });
});
