/**
 * Session wire types and message parsing.
 *
 * The console talks to a session endpoint over a WebSocket carrying JSON
 * text frames.  The server pushes three message types — `hello` once per
 * connection, `snapshot` every tick, and `ack` in reply to commands — and
 * the console sends `command` frames.  Every message carries `v: 1`;
 * anything else is ignored rather than treated as fatal, so an older
 * console survives a newer server.
 */

export const PROTOCOL_VERSION = 1;

// ---------------------------------------------------------------------------
// Server → console payloads
// ---------------------------------------------------------------------------

/** Static world geometry shipped once in the session hello. */
export interface EntityOutline {
  label: string;
  shape: {
    kind: string;
    center?: [number, number];
    radius?: number;
    vertices?: Array<[number, number]>;
  };
  height: string;
}

export interface RegionOutline {
  name: string;
  polygon: Array<[number, number]>;
  vocab: string[];
}

export interface WorldOutline {
  bounds: [number, number, number, number];
  walls: Array<[number, number, number, number]>;
  entities: EntityOutline[];
  regions: RegionOutline[];
  background: string[];
}

/** First frame after connecting: session configuration plus the world outline. */
export interface SessionHello {
  world: WorldOutline;
  origin: [number, number, number];
  n_split: number;
  tick_s: number;
  strategy: string;
}

/** Per-tick session state.  Most recent one received is the one to show. */
export interface Snapshot {
  t: number;
  pose: [number, number, number];
  instruction: string | null;
  strategy: string;
  paused: boolean;
  terminated: string | null;
  e: number[];
  theta: number;
  linear: number;
  rotate: number;
  gated: boolean;
  contributors: Array<[number, number]>;
  a: Record<string, number[]>;
  stale: Record<string, boolean>;
}

/** Reply to a command frame; `message` explains a refusal. */
export interface Ack {
  id: number;
  ok: boolean;
  message?: string;
}

/** Everything the parser can hand back, including the deliberate shrug. */
export type ServerEvent =
  | { kind: "hello"; hello: SessionHello }
  | { kind: "snapshot"; snapshot: Snapshot }
  | { kind: "ack"; ack: Ack }
  | { kind: "server-error"; message: string }
  | { kind: "ignored"; reason: string };

// ---------------------------------------------------------------------------
// Console → server commands
// ---------------------------------------------------------------------------

export type CommandKind =
  | "set_instruction"
  | "pause"
  | "resume"
  | "reset"
  | "set_strategy";

export interface CommandMessage {
  v: 1;
  type: "command";
  id: number;
  kind: CommandKind;
  text?: string;
  strategy?: string;
}

/** Serialize a command frame ready to send as one WebSocket text message. */
export function commandFrame(
  id: number,
  kind: CommandKind,
  extra: { text?: string; strategy?: string } = {},
): string {
  const msg: CommandMessage = { v: 1, type: "command", id, kind, ...extra };
  return JSON.stringify(msg);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function isNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isTriple(x: unknown): x is [number, number, number] {
  return Array.isArray(x) && x.length === 3 && x.every(isNumber);
}

function isNumberArray(x: unknown): x is number[] {
  return Array.isArray(x) && x.every(isNumber);
}

function ignored(reason: string): ServerEvent {
  return { kind: "ignored", reason };
}

/**
 * Parse one server text frame into a typed event.
 *
 * Never throws: malformed JSON, missing fields, unknown types, and
 * version mismatches all come back as `ignored` with a reason, so a
 * single bad frame cannot take the console down.
 */
export function parseServerMessage(text: string): ServerEvent {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return ignored("not JSON");
  }
  if (!isRecord(raw)) {
    return ignored("not an object");
  }
  if (raw["v"] !== PROTOCOL_VERSION) {
    return ignored("unsupported protocol version");
  }
  switch (raw["type"]) {
    case "hello": {
      const world = raw["world"];
      if (!isRecord(world) || !Array.isArray(world["walls"])) {
        return ignored("hello without a world outline");
      }
      if (!isTriple(raw["origin"]) || !isNumber(raw["n_split"]) || !isNumber(raw["tick_s"])) {
        return ignored("hello missing session fields");
      }
      return {
        kind: "hello",
        hello: {
          world: world as unknown as WorldOutline,
          origin: raw["origin"],
          n_split: raw["n_split"],
          tick_s: raw["tick_s"],
          strategy: String(raw["strategy"] ?? ""),
        },
      };
    }
    case "snapshot": {
      if (!isNumber(raw["t"]) || !isTriple(raw["pose"])) {
        return ignored("snapshot missing pose or time");
      }
      if (!isNumberArray(raw["e"]) || !isNumber(raw["theta"])) {
        return ignored("snapshot missing scores");
      }
      const a = isRecord(raw["a"]) ? raw["a"] : {};
      const stale = isRecord(raw["stale"]) ? raw["stale"] : {};
      const contributors = Array.isArray(raw["contributors"]) ? raw["contributors"] : [];
      return {
        kind: "snapshot",
        snapshot: {
          t: raw["t"],
          pose: raw["pose"],
          instruction: typeof raw["instruction"] === "string" ? raw["instruction"] : null,
          strategy: String(raw["strategy"] ?? ""),
          paused: raw["paused"] === true,
          terminated: typeof raw["terminated"] === "string" ? raw["terminated"] : null,
          e: raw["e"],
          theta: raw["theta"],
          linear: isNumber(raw["linear"]) ? raw["linear"] : 0,
          rotate: isNumber(raw["rotate"]) ? raw["rotate"] : 0,
          gated: raw["gated"] === true,
          contributors: contributors as Array<[number, number]>,
          a: a as Record<string, number[]>,
          stale: stale as Record<string, boolean>,
        },
      };
    }
    case "ack": {
      if (!isNumber(raw["id"]) || typeof raw["ok"] !== "boolean") {
        return ignored("ack missing id or verdict");
      }
      const ack: Ack = { id: raw["id"], ok: raw["ok"] };
      if (typeof raw["message"] === "string") {
        ack.message = raw["message"];
      }
      return { kind: "ack", ack };
    }
    case "error":
      return {
        kind: "server-error",
        message: typeof raw["message"] === "string" ? raw["message"] : "unspecified server error",
      };
    default:
      return ignored(`unknown message type ${String(raw["type"])}`);
  }
}
