// DOM rendering: each panel redraws from the PanelState alone.
// Long lists are virtualized the cheap way -- only the newest rows are in
// the DOM, with a count of everything above the fold.

import { renderMR } from "./frames.js";
import type { PanelState } from "./store.js";
import type { TreeView } from "./protocol.js";

const MAX_ROWS = 300;
const CELL = 26;

function el(id: string): HTMLElement {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found;
}

function overflowNote(total: number, shown: number): string {
  return total > shown ? `<div class="overflow">… ${total - shown} earlier entries</div>` : "";
}

function escapeHtml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderTranscript(state: PanelState): void {
  const rows = state.transcript.slice(-MAX_ROWS);
  el("transcript").innerHTML =
    overflowNote(state.transcript.length, rows.length) +
    rows.map((turn) =>
      `<div class="turn ${turn.speaker.includes("-") ? "robot" : "human"}">` +
      `<span class="tick">${turn.tick}</span>` +
      `<span class="speaker">${escapeHtml(turn.speaker)}</span>` +
      `<span class="text">${escapeHtml(turn.text)}</span></div>`).join("");
  scrollToEnd("transcript");
}

export function renderAgenda(state: PanelState): void {
  const parts: string[] = [];
  for (const [agent, agenda] of Object.entries(state.agendas).sort()) {
    parts.push(`<h3>${escapeHtml(agent)}</h3>`);
    if (agenda.goals.length === 0) {
      parts.push('<div class="empty">no goals</div>');
      continue;
    }
    for (const goal of agenda.goals) {
      parts.push(
        `<div class="goal status-${goal.status}">` +
        `<span class="concept">${escapeHtml(goal.concept)}</span>` +
        `<span class="priority">p${goal.priority}</span>` +
        `<span class="status">${goal.status}</span></div>`);
      if (goal.plan) {
        parts.push('<ul class="plan">');
        for (const step of goal.plan.steps) {
          parts.push(
            `<li class="step status-${step.status}">` +
            `${escapeHtml(step.label)} <em>${step.status}</em></li>`);
        }
        parts.push("</ul>");
      }
    }
  }
  el("agenda").innerHTML = parts.join("");
}

export function renderThoughts(state: PanelState): void {
  const parts: string[] = [];
  for (const [agent, entries] of Object.entries(state.thoughts).sort()) {
    parts.push(`<h3>${escapeHtml(agent)}</h3>`);
    const rows = entries.slice(-MAX_ROWS);
    parts.push(overflowNote(entries.length, rows.length));
    for (const thought of rows) {
      parts.push(
        `<div class="thought"><span class="tick">${thought.tick}</span>` +
        `<span class="kind">${escapeHtml(thought.kind)}</span>` +
        `<span class="detail">${escapeHtml(JSON.stringify(thought.payload))}</span></div>`);
    }
  }
  el("thoughts").innerHTML = parts.join("");
  scrollToEnd("thoughts");
}

export function renderVmrs(state: PanelState): void {
  const rows = state.vmrs.slice(-12);
  el("vmrs").innerHTML =
    overflowNote(state.vmrs.length, rows.length) +
    rows.map(({ agent, mr }) =>
      `<div class="vmr"><div class="author">${escapeHtml(agent)}</div>` +
      `<pre>${escapeHtml(renderMR(mr))}</pre></div>`).join("");
}

export function renderMilestones(state: PanelState): void {
  el("milestones").innerHTML = state.milestones.map((m) =>
    `<span class="badge ${m.ok ? "pass" : "fail"}">${escapeHtml(m.name)}</span>`).join("");
}

const ROOM_FILLS = ["#2a3950", "#32424f", "#39324f", "#324f3c", "#4f4632", "#44324f"];

export function renderWorld(state: PanelState): void {
  const canvas = el("world") as HTMLCanvasElement;
  const world = state.world;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  if (!world) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  canvas.width = world.width * CELL;
  canvas.height = world.height * CELL;
  ctx.fillStyle = "#1c2430";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  const roomNames = Object.keys(world.rooms).sort();
  roomNames.forEach((name, i) => {
    ctx.fillStyle = ROOM_FILLS[i % ROOM_FILLS.length];
    for (const [x, y] of world.rooms[name]) {
      ctx.fillRect(x * CELL, y * CELL, CELL, CELL);
    }
  });
  ctx.fillStyle = "#0a0d12";
  for (const key of world.obstacles) {
    const [x, y] = key.split(",").map(Number);
    ctx.fillRect(x * CELL, y * CELL, CELL, CELL);
  }
  ctx.font = `${CELL * 0.55}px monospace`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  roomNames.forEach((name, i) => {
    const cells = world.rooms[name];
    if (cells.length === 0) return;
    const cx = cells.reduce((a, c) => a + c[0], 0) / cells.length;
    const cy = cells.reduce((a, c) => a + c[1], 0) / cells.length;
    ctx.fillStyle = "rgba(255,255,255,0.25)";
    ctx.fillText(name, (cx + 0.5) * CELL, (cy + 0.5) * CELL);
  });
  for (const [oid, obj] of Object.entries(world.objects).sort()) {
    ctx.fillStyle = obj.heldBy ? "#d8b74a88" : "#d8b74a";
    ctx.fillRect(obj.x * CELL + 5, obj.y * CELL + 5, CELL - 10, CELL - 10);
    ctx.fillStyle = "#10151c";
    ctx.fillText(obj.type[0], (obj.x + 0.5) * CELL, (obj.y + 0.52) * CELL);
    void oid;
  }
  for (const [hid, human] of Object.entries(world.humans).sort()) {
    ctx.fillStyle = "#6fc2ff";
    ctx.beginPath();
    ctx.moveTo((human.x + 0.5) * CELL, human.y * CELL + 4);
    ctx.lineTo(human.x * CELL + 4, (human.y + 1) * CELL - 4);
    ctx.lineTo((human.x + 1) * CELL - 4, (human.y + 1) * CELL - 4);
    ctx.closePath();
    ctx.fill();
    void hid;
  }
  for (const [rid, robot] of Object.entries(world.robots).sort()) {
    ctx.fillStyle = robot.kind === "DRONE" ? "#9a6fff" : "#58d68d";
    ctx.beginPath();
    ctx.arc((robot.x + 0.5) * CELL, (robot.y + 0.5) * CELL, CELL * 0.36, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillStyle = "#10151c";
    ctx.fillText(rid[0], (robot.x + 0.5) * CELL, (robot.y + 0.52) * CELL);
  }
}

function treeHtml(node: TreeView): string {
  const status = node.status ? ` bt-${node.status}` : "";
  const children = node.children.length
    ? `<ul>${node.children.map((c) => `<li>${treeHtml(c)}</li>`).join("")}</ul>`
    : "";
  return `<span class="bt-node${status}">${escapeHtml(node.kind)} ` +
    `${escapeHtml(node.name)}</span>${children}`;
}

export function renderTrees(state: PanelState): void {
  const parts: string[] = [];
  for (const [agent, tree] of Object.entries(state.trees).sort()) {
    parts.push(`<h3>${escapeHtml(agent)}</h3>`);
    parts.push(tree ? `<div class="bt">${treeHtml(tree)}</div>`
                    : '<div class="empty">no tree</div>');
  }
  el("trees").innerHTML = parts.join("");
}

export function renderStatusBar(state: PanelState, connection: string): void {
  const banner = el("banner");
  banner.className = `banner ${connection}`;
  const schema = state.schemaOk === false ? " — SCHEMA MISMATCH" : "";
  const finished = state.finished ? " — run finished" : "";
  banner.textContent = `${connection}${schema}${finished} — tick ${state.snapshotTick}`;
}

export function renderAll(state: PanelState, connection: string): void {
  renderStatusBar(state, connection);
  renderTranscript(state);
  renderAgenda(state);
  renderThoughts(state);
  renderVmrs(state);
  renderWorld(state);
  renderTrees(state);
  renderMilestones(state);
}

function scrollToEnd(id: string): void {
  const node = el(id);
  node.scrollTop = node.scrollHeight;
}
