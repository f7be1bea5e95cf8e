/**
 * Console session state.
 *
 * One `ConsoleStore` holds everything the UI shows: connection status, the
 * session hello, the most recently received snapshot, the pose trail, the
 * instruction draft, pending commands, and toasts.  It is deliberately free
 * of DOM and socket code — callers feed it socket lifecycle events and
 * server text frames, and send the command frames it hands back — which
 * keeps every rule in this file testable without a browser.
 *
 * Draft-safety rules:
 *  - submitting clears the draft optimistically;
 *  - a nack, a command timeout, or a connection loss restores the draft,
 *    but only if the operator has not started typing something new;
 *  - after a timeout or disconnect the retained draft is offered for retry.
 */

import {
  Ack,
  CommandKind,
  SessionHello,
  Snapshot,
  ServerEvent,
  commandFrame,
  parseServerMessage,
} from "./protocol.js";

/** Longest pose trail kept; older points fall off the front. */
export const TRAIL_CAP = 2000;

/** How long a command may wait for its ack before it is declared lost. */
export const COMMAND_TIMEOUT_MS = 3000;

export type ConnectionStatus = "connecting" | "connected" | "closed";

export interface Toast {
  level: "error" | "info";
  text: string;
  at: number;
}

interface PendingCommand {
  id: number;
  kind: CommandKind;
  sentAt: number;
  /** Draft text to restore if a set_instruction dies. */
  draft?: string;
}

export class ConsoleStore {
  status: ConnectionStatus = "connecting";
  hello: SessionHello | null = null;
  snapshot: Snapshot | null = null;
  trail: Array<[number, number]> = [];
  draft = "";
  toasts: Toast[] = [];
  /** True when a lost instruction is parked in `draft` awaiting a retry. */
  retryAvailable = false;

  private pending = new Map<number, PendingCommand>();
  private nextId = 1;

  // -- socket lifecycle -----------------------------------------------------

  onOpen(): void {
    this.status = "connected";
  }

  /** Connection dropped: every in-flight command is lost with it. */
  onClose(now: number): void {
    if (this.status === "closed") {
      return;
    }
    this.status = "closed";
    for (const pend of this.pending.values()) {
      this.failPending(pend, "connection lost", now, true);
    }
    this.pending.clear();
  }

  // -- server messages ------------------------------------------------------

  /** Parse and apply one server text frame; returns the parsed event. */
  onServerText(text: string, now: number): ServerEvent {
    const event = parseServerMessage(text);
    switch (event.kind) {
      case "hello":
        this.hello = event.hello;
        this.snapshot = null;
        this.trail = [];
        break;
      case "snapshot":
        this.applySnapshot(event.snapshot);
        break;
      case "ack":
        this.applyAck(event.ack, now);
        break;
      case "server-error":
        this.toast("error", event.message, now);
        break;
      case "ignored":
        break;
    }
    return event;
  }

  private applySnapshot(snap: Snapshot): void {
    // Time running backwards means the session restarted under us; the old
    // trail belongs to the previous run.
    if (this.snapshot !== null && snap.t < this.snapshot.t) {
      this.trail = [];
    }
    this.snapshot = snap;
    const last = this.trail[this.trail.length - 1];
    if (last === undefined || last[0] !== snap.pose[0] || last[1] !== snap.pose[1]) {
      this.trail.push([snap.pose[0], snap.pose[1]]);
      if (this.trail.length > TRAIL_CAP) {
        this.trail.splice(0, this.trail.length - TRAIL_CAP);
      }
    }
  }

  private applyAck(ack: Ack, now: number): void {
    const pend = this.pending.get(ack.id);
    if (pend === undefined) {
      return;
    }
    this.pending.delete(ack.id);
    if (!ack.ok) {
      this.failPending(pend, ack.message ?? "command refused", now, false);
    }
  }

  // -- operator actions -----------------------------------------------------

  /** Operator typed; new text supersedes any retained retry draft. */
  setDraft(text: string): void {
    this.draft = text;
    this.retryAvailable = false;
  }

  /**
   * Submit the current draft as a set_instruction command.
   *
   * Returns the frame to send, or null when there is nothing to send:
   * blank draft, or no live connection (the draft is kept and a retry
   * offered so nothing typed is lost).
   */
  submitInstruction(now: number): string | null {
    const text = this.draft.trim();
    if (text === "") {
      return null;
    }
    if (this.status !== "connected") {
      this.toast("error", "not connected; instruction kept as draft", now);
      this.retryAvailable = true;
      return null;
    }
    const id = this.nextId++;
    this.pending.set(id, { id, kind: "set_instruction", sentAt: now, draft: this.draft });
    this.draft = "";
    this.retryAvailable = false;
    return commandFrame(id, "set_instruction", { text });
  }

  /**
   * Build a non-instruction command frame (pause/resume/reset/set_strategy).
   * Returns null when disconnected.
   */
  command(
    kind: Exclude<CommandKind, "set_instruction">,
    extra: { strategy?: string } = {},
    now: number,
  ): string | null {
    if (this.status !== "connected") {
      this.toast("error", `not connected; ${kind} not sent`, now);
      return null;
    }
    const id = this.nextId++;
    this.pending.set(id, { id, kind, sentAt: now });
    return commandFrame(id, kind, extra);
  }

  /** Expire commands whose ack never arrived. */
  checkTimeouts(now: number): void {
    for (const pend of [...this.pending.values()]) {
      if (now - pend.sentAt >= COMMAND_TIMEOUT_MS) {
        this.pending.delete(pend.id);
        this.failPending(pend, `${pend.kind} timed out`, now, true);
      }
    }
  }

  hasPending(kind?: CommandKind): boolean {
    if (kind === undefined) {
      return this.pending.size > 0;
    }
    for (const pend of this.pending.values()) {
      if (pend.kind === kind) {
        return true;
      }
    }
    return false;
  }

  // -- internals ------------------------------------------------------------

  private failPending(pend: PendingCommand, reason: string, now: number, offerRetry: boolean): void {
    this.toast("error", reason, now);
    if (pend.kind === "set_instruction" && pend.draft !== undefined && this.draft === "") {
      this.draft = pend.draft;
      if (offerRetry) {
        this.retryAvailable = true;
      }
    }
  }

  private toast(level: Toast["level"], text: string, at: number): void {
    this.toasts.push({ level, text, at });
    if (this.toasts.length > 8) {
      this.toasts.splice(0, this.toasts.length - 8);
    }
  }
}
