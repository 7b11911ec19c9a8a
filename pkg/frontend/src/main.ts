/**
 * Browser bootstrap: wires the DOM shell in index.html to the API client,
 * chat panel, and trace poller. All state shown on screen comes from the
 * pure renderers in render.ts over API responses.
 */

import { ConsoleApi } from "./api.js";
import { ChatPanel } from "./chat.js";
import { TracePoller } from "./poll.js";
import {
  renderBanners,
  renderSessionHeader,
  renderTimeline,
  renderTranscript,
  renderValidationReport,
} from "./render.js";
import { buildTimeline } from "./timeline.js";
import type { SessionInfo, TraceHop } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const apiUrlInput = el<HTMLInputElement>("api-url");
const authTokenInput = el<HTMLInputElement>("auth-token");
const treeSource = el<HTMLTextAreaElement>("tree-source");
const treeFormat = el<HTMLSelectElement>("tree-format");
const treeIdInput = el<HTMLInputElement>("tree-id");
const uploadBtn = el<HTMLButtonElement>("upload-btn");
const reportBox = el<HTMLElement>("report");
const sessionTreeId = el<HTMLInputElement>("session-tree-id");
const createSessionBtn = el<HTMLButtonElement>("create-session-btn");
const sessionHeaderBox = el<HTMLElement>("session-header");
const transcriptBox = el<HTMLElement>("transcript");
const bannersBox = el<HTMLElement>("banners");
const timelineBox = el<HTMLElement>("timeline");
const chatInput = el<HTMLTextAreaElement>("chat-input");
const sendBtn = el<HTMLButtonElement>("send-btn");

let api = new ConsoleApi();
let session: SessionInfo | null = null;
let panel: ChatPanel | null = null;
let poller: TracePoller | null = null;
let traceHops: TraceHop[] = [];

function makeApi(): ConsoleApi {
  return new ConsoleApi({
    baseUrl: apiUrlInput.value.trim(),
    authToken: authTokenInput.value.trim(),
  });
}

function render(): void {
  if (session) sessionHeaderBox.innerHTML = renderSessionHeader(session);
  if (panel) {
    transcriptBox.innerHTML = renderTranscript(panel.transcript);
    bannersBox.innerHTML = renderBanners(panel.sendLocked, panel.retryBanner);
    timelineBox.innerHTML = renderTimeline(buildTimeline(panel.turnCount, traceHops));
    sendBtn.disabled = panel.sendLocked;
    transcriptBox.scrollTop = transcriptBox.scrollHeight;
  }
}

// -- tree upload / validation report -------------------------------------

uploadBtn.addEventListener("click", async () => {
  api = makeApi();
  uploadBtn.disabled = true;
  try {
    const report = await api.uploadTree({
      source: treeSource.value,
      format: treeFormat.value === "csv" ? "csv" : "json",
      tree_id: treeIdInput.value.trim() || undefined,
    });
    reportBox.innerHTML = renderValidationReport(report);
    if (report.version !== null) sessionTreeId.value = report.tree_id;
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    reportBox.innerHTML = `<div class="report-status report-status--rejected">${message}</div>`;
  } finally {
    uploadBtn.disabled = false;
  }
});

// -- session lifecycle ----------------------------------------------------

createSessionBtn.addEventListener("click", async () => {
  api = makeApi();
  const treeId = sessionTreeId.value.trim();
  if (!treeId) return;
  createSessionBtn.disabled = true;
  try {
    session = await api.createSession(treeId);
    traceHops = [];
    poller?.stop();
    panel = new ChatPanel(api, session.session_id, render);
    poller = new TracePoller(api, session.session_id, (trace) => {
      traceHops = trace.hops;
      void refreshSessionHeader();
      render();
    });
    poller.start();
    render();
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    sessionHeaderBox.innerHTML = `<div class="banner banner--error">${message}</div>`;
  } finally {
    createSessionBtn.disabled = false;
  }
});

async function refreshSessionHeader(): Promise<void> {
  if (!session) return;
  try {
    session = await api.getSession(session.session_id);
  } catch {
    return; // keep the stale header; the next poll retries
  }
}

// -- sending --------------------------------------------------------------

function submit(): void {
  if (!panel) return;
  const text = chatInput.value;
  chatInput.value = "";
  void panel.send(text);
}

sendBtn.addEventListener("click", submit);
chatInput.addEventListener("keydown", (e) => {
  if (e.key === "Enter" && !e.shiftKey) {
    e.preventDefault();
    submit();
  }
});

// the retry button lives inside the banner markup, so delegate
bannersBox.addEventListener("click", (e) => {
  const target = e.target as HTMLElement;
  if (target.id === "retry-btn" && panel) void panel.retry();
});
