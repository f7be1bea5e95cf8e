/**
 * Page wiring: DOM events in, store mutations and command frames out,
 * canvases repainted on an animation-frame loop.
 */

import { ConsoleStore } from "./state.js";
import { renderMap, renderScores } from "./render.js";
import { applyOps, paintScores } from "./paint.js";
import { parseEndpoint, SessionLink } from "./net.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const store = new ConsoleStore();
const endpoint = parseEndpoint(window.location.search);

const mapCanvas = byId<HTMLCanvasElement>("map");
const scoresCanvas = byId<HTMLCanvasElement>("scores");
const statusEl = byId<HTMLSpanElement>("status");
const clockEl = byId<HTMLSpanElement>("clock");
const pausedChip = byId<HTMLSpanElement>("paused-chip");
const instructionEl = byId<HTMLSpanElement>("active-instruction");
const draftInput = byId<HTMLInputElement>("draft");
const sendBtn = byId<HTMLButtonElement>("send");
const retryBtn = byId<HTMLButtonElement>("retry");
const pauseBtn = byId<HTMLButtonElement>("pause");
const resumeBtn = byId<HTMLButtonElement>("resume");
const resetBtn = byId<HTMLButtonElement>("reset");
const strategySelect = byId<HTMLSelectElement>("strategy");
const toastsEl = byId<HTMLDivElement>("toasts");

const link = new SessionLink(endpoint.url, {
  onOpen: () => store.onOpen(),
  onText: (text) => store.onServerText(text, Date.now()),
  onClose: () => store.onClose(Date.now()),
});

function sendFrame(frame: string | null): void {
  if (frame !== null && !link.send(frame)) {
    store.onClose(Date.now());
  }
}

draftInput.addEventListener("input", () => {
  store.setDraft(draftInput.value);
});

function submit(): void {
  sendFrame(store.submitInstruction(Date.now()));
  draftInput.value = store.draft;
}

sendBtn.addEventListener("click", submit);
draftInput.addEventListener("keydown", (ev) => {
  if (ev.key === "Enter") {
    submit();
  }
});
retryBtn.addEventListener("click", submit);

pauseBtn.addEventListener("click", () => sendFrame(store.command("pause", {}, Date.now())));
resumeBtn.addEventListener("click", () => sendFrame(store.command("resume", {}, Date.now())));
resetBtn.addEventListener("click", () => sendFrame(store.command("reset", {}, Date.now())));
strategySelect.addEventListener("change", () => {
  sendFrame(store.command("set_strategy", { strategy: strategySelect.value }, Date.now()));
});

setInterval(() => store.checkTimeouts(Date.now()), 500);

function repaint(): void {
  const mapCtx = mapCanvas.getContext("2d");
  if (mapCtx !== null) {
    applyOps(mapCtx, renderMap(store.hello, store.snapshot, store.trail, mapCanvas.width, mapCanvas.height));
  }
  const nSplit = store.hello?.n_split ?? store.snapshot?.e.length ?? 8;
  const scoreCtx = scoresCanvas.getContext("2d");
  if (scoreCtx !== null) {
    paintScores(scoreCtx, renderScores(store.snapshot, nSplit), scoresCanvas.width, scoresCanvas.height);
  }

  statusEl.textContent = store.status;
  statusEl.className = `chip ${store.status}`;
  const snap = store.snapshot;
  clockEl.textContent = snap === null ? "t=—" : `t=${snap.t.toFixed(2)}s`;
  pausedChip.hidden = !(snap?.paused ?? false);
  instructionEl.textContent = snap?.instruction ?? "(none)";
  if (snap !== null && !store.hasPending("set_strategy") && strategySelect.value !== snap.strategy) {
    strategySelect.value = snap.strategy;
  }
  retryBtn.hidden = !store.retryAvailable;
  if (document.activeElement !== draftInput && draftInput.value !== store.draft) {
    draftInput.value = store.draft;
  }

  const lines = store.toasts.slice(-4);
  toastsEl.textContent = "";
  for (const toast of lines) {
    const div = document.createElement("div");
    div.className = `toast ${toast.level}`;
    div.textContent = toast.text;
    toastsEl.appendChild(div);
  }

  requestAnimationFrame(repaint);
}

requestAnimationFrame(repaint);
