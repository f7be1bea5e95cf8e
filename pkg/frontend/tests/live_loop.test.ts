/**
 * End-to-end console loop against a live session server.
 *
 * Spawns the navigation server on ephemeral ports, connects with the same
 * masked-frame WebSocket rules a browser follows, and drives the real
 * ConsoleStore: an instruction typed into the store must be acked, appear
 * in the next snapshot, and swing the steering angle within two ticks on
 * a world where the named target sits behind the robot.  The score panel
 * built from that snapshot must carry the snapshot's numbers untouched.
 */

import { ChildProcess, spawn } from "node:child_process";
import { fileURLToPath } from "node:url";
import path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { ConsoleStore } from "../src/state.js";
import { renderMap, renderScores } from "../src/render.js";
import { Snapshot } from "../src/protocol.js";
import { WsClient } from "./helpers/ws.js";

const REPO = fileURLToPath(new URL("../..", import.meta.url));
const WORLD = path.join(REPO, "src", "omninav", "worlds", "basic.world");

let server: ChildProcess;
let client: WsClient;
let store: ConsoleStore;

function spawnServer(): Promise<number> {
  return new Promise((resolve, reject) => {
    server = spawn(
      "python3",
      ["-m", "omninav", "serve", "--world", WORLD, "--port", "0", "--scorer-port", "0"],
      { cwd: REPO, stdio: ["ignore", "pipe", "pipe"] },
    );
    let out = "";
    const timer = setTimeout(() => reject(new Error(`server never announced its port:\n${out}`)), 20_000);
    server.stdout!.on("data", (chunk: Buffer) => {
      out += chunk.toString("utf8");
      const m = out.match(/session endpoint ws:\/\/127\.0\.0\.1:(\d+)/);
      if (m !== null) {
        clearTimeout(timer);
        resolve(Number.parseInt(m[1]!, 10));
      }
    });
    server.stderr!.on("data", (chunk: Buffer) => {
      out += chunk.toString("utf8");
    });
    server.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}):\n${out}`));
    });
  });
}

let snapshotCount = 0;

/** Feed server frames into the store until `done` says stop. */
async function pumpUntil<T>(done: () => T | null, deadlineMs = 15_000): Promise<T> {
  const deadline = Date.now() + deadlineMs;
  for (;;) {
    const hit = done();
    if (hit !== null) {
      return hit;
    }
    const remaining = deadline - Date.now();
    if (remaining <= 0) {
      throw new Error("condition not reached before deadline");
    }
    const text = await client.nextText(remaining);
    const event = store.onServerText(text, Date.now());
    if (event.kind === "snapshot") {
      snapshotCount += 1;
    }
  }
}

/** Pump until a snapshot strictly after the current one arrives. */
async function nextSnapshot(): Promise<Snapshot> {
  const seen = store.snapshot?.t ?? -1;
  return pumpUntil(() => {
    const snap = store.snapshot;
    return snap !== null && snap.t !== seen ? snap : null;
  });
}

beforeAll(async () => {
  const port = await spawnServer();
  client = await WsClient.connect("127.0.0.1", port);
  store = new ConsoleStore();
  store.onOpen();
});

afterAll(() => {
  client?.close();
  server?.kill("SIGTERM");
});

describe("console loop against a live session", () => {
  it("receives the hello with the world outline", async () => {
    await pumpUntil(() => store.hello);
    const hello = store.hello!;
    expect(hello.n_split).toBe(8);
    expect(hello.tick_s).toBeCloseTo(0.1);
    expect(hello.world.walls.length).toBeGreaterThan(0);
    expect(hello.world.regions.map((r) => r.name)).toContain("kitchen");
    expect(hello.origin).toHaveLength(3);
  });

  it("a typed instruction is acked, lands in the next snapshot, and steers within two ticks", async () => {
    // Baseline: uninstructed ticks hold the heading.
    await nextSnapshot();
    const baseline = await nextSnapshot();
    expect(baseline.instruction).toBeNull();
    expect(baseline.theta).toBe(0);

    // Type and submit through the real store.
    store.setDraft("go to the kitchen");
    const frame = store.submitInstruction(Date.now());
    expect(frame).not.toBeNull();
    expect(store.draft).toBe("");
    client.sendText(frame!);

    // Track the last pre-instruction tick while waiting for the ack.
    let lastUninstructedT = baseline.t;
    const ackEvent = await pumpUntil(() => {
      if (store.snapshot !== null && store.snapshot.instruction === null) {
        lastUninstructedT = store.snapshot.t;
      }
      return store.hasPending("set_instruction") ? null : true;
    });
    expect(ackEvent).toBe(true);
    expect(store.toasts).toHaveLength(0); // clean ack: no error surfaced
    expect(store.draft).toBe(""); // and the draft stayed cleared

    // The very next snapshot reflects the instruction.
    const first = await nextSnapshot();
    expect(first.instruction).toBe("go to the kitchen");

    // The kitchen is behind the spawn heading, so theta must swing hard
    // within two ticks of the last uninstructed snapshot.
    let steered = first;
    if (Math.abs(steered.theta) <= 1.0) {
      steered = await nextSnapshot();
    }
    expect(Math.abs(steered.theta)).toBeGreaterThan(1.0);
    const tick = store.hello!.tick_s;
    expect(steered.t - lastUninstructedT).toBeLessThanOrEqual(2 * tick + 1e-6);
  });

  it("per-slice bars match the snapshot values exactly", async () => {
    const snap = await pumpUntil(() => {
      const s = store.snapshot;
      return s !== null && s.a["clip"] !== undefined && s.a["detic"] !== undefined ? s : null;
    });
    const panel = renderScores(snap, store.hello!.n_split);
    const byRole = new Map(panel.groups.map((g) => [g.role, g]));
    expect(byRole.get("clip")!.bars.map((b) => b.value)).toEqual(snap.a["clip"]);
    expect(byRole.get("detic")!.bars.map((b) => b.value)).toEqual(snap.a["detic"]);
    expect(byRole.get("fused")!.bars.map((b) => b.value)).toEqual(snap.e);
    for (const group of panel.groups) {
      expect(group.bars).toHaveLength(store.hello!.n_split);
    }
    // No scorer has dialed into the gateway, so the session answers from
    // its fallback and flags both roles stale — the panel must badge that.
    expect(panel.staleBadge).toBe(true);
  });

  it("the map renders the live world and robot", async () => {
    const snap = store.snapshot!;
    const ops = renderMap(store.hello, snap, store.trail, 800, 600);
    const tagged = (tag: string) => ops.filter((op) => "tag" in op && op.tag === tag);
    expect(tagged("wall").length).toBe(store.hello!.world.walls.length);
    expect(tagged("robot")).toHaveLength(1);
    expect(tagged("heading")).toHaveLength(1);
    expect(tagged("target-ray")).toHaveLength(1); // instruction still active
  });

  it("pause freezes the session clock until resume", async () => {
    const frame = store.command("pause", {}, Date.now());
    expect(frame).not.toBeNull();
    client.sendText(frame!);
    await pumpUntil(() => (store.hasPending("pause") ? null : true));

    const t0 = (await nextSnapshotPaused()).t;
    for (let i = 0; i < 3; i++) {
      const snap = await pumpSnapshotAny();
      expect(snap.paused).toBe(true);
      expect(snap.t).toBe(t0);
    }

    const resume = store.command("resume", {}, Date.now());
    client.sendText(resume!);
    await pumpUntil(() => (store.hasPending("resume") ? null : true));
    const moving = await pumpUntil(() => {
      const snap = store.snapshot;
      return snap !== null && !snap.paused && snap.t > t0 ? snap : null;
    });
    expect(moving.t).toBeGreaterThan(t0);
  });
});

/** Pump until a paused snapshot arrives. */
async function nextSnapshotPaused(): Promise<Snapshot> {
  return pumpUntil(() => (store.snapshot !== null && store.snapshot.paused ? store.snapshot : null));
}

/** Pump exactly one more server snapshot frame (paused ticks repeat t). */
async function pumpSnapshotAny(): Promise<Snapshot> {
  const before = snapshotCount;
  return pumpUntil(() => (snapshotCount > before ? store.snapshot : null));
}
