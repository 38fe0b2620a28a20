// Console entry point: connect to the gateway, fold events into the
// panel model, render, and forward typed utterances.

import { serviceAddress, type GatewayEvent, type Snapshot } from "./protocol.js";
import { EventStream, fetchSnapshot, postControl, postUtterance } from "./sse.js";
import { applyEvent, applySnapshot, initialState, type PanelState } from "./store.js";
import { renderAll } from "./panels.js";

const base = serviceAddress();
let state: PanelState = initialState();
let connection = "connecting";
let renderQueued = false;

function queueRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    renderAll(state, connection);
  });
}

function onEvent(event: GatewayEvent): void {
  state = applyEvent(state, event);
  queueRender();
}

async function refreshSnapshot(): Promise<void> {
  try {
    const snap = (await fetchSnapshot(base)) as Snapshot;
    state = applySnapshot(state, snap);
    queueRender();
  } catch {
    // offline: the stream's status callback drives the banner
  }
}

const stream = new EventStream({
  base,
  nextSeq: () => state.lastSeq + 1,
  onEvent,
  onStatus: (status) => {
    connection = status;
    if (status === "online") void refreshSnapshot();
    queueRender();
  },
});

function wireControls(): void {
  const input = document.getElementById("say") as HTMLInputElement;
  const speaker = document.getElementById("speaker") as HTMLInputElement;
  const send = document.getElementById("send") as HTMLButtonElement;
  const note = document.getElementById("say-note") as HTMLElement;

  async function submit(): Promise<void> {
    const text = input.value.trim();
    if (!text) return;
    send.disabled = true;
    const result = await postUtterance(base, speaker.value.trim() || "human", text);
    send.disabled = false;
    note.textContent = result.ok ? "" : result.detail;
    if (result.ok) input.value = "";   // echoed back via the stream, no optimistic insert
  }

  send.addEventListener("click", () => void submit());
  input.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void submit();
  });
  input.addEventListener("input", () => {
    send.disabled = input.value.trim() === "";
  });
  send.disabled = true;

  for (const action of ["pause", "resume", "step"] as const) {
    const button = document.getElementById(`ctl-${action}`);
    button?.addEventListener("click", () => void postControl(base, action));
  }
}

wireControls();
void refreshSnapshot();
stream.start();
setInterval(() => {
  if (connection === "online" && !state.finished) void refreshSnapshot();
}, 1000);
