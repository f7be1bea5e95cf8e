/**
 * Pure rendering: session state in, drawing data out.
 *
 * Nothing in this module touches the DOM.  `renderMap` turns a hello +
 * snapshot + trail into a flat list of tagged draw operations in screen
 * coordinates, and `renderScores` turns a snapshot into a bar-panel
 * description whose values are copied verbatim from the snapshot.  A thin
 * paint layer (paint.ts) replays these onto canvases; tests assert on the
 * data directly.
 */

import { SessionHello, Snapshot } from "./protocol.js";

// ---------------------------------------------------------------------------
// Draw operations
// ---------------------------------------------------------------------------

export type DrawOp =
  | { op: "clear"; width: number; height: number }
  | { op: "grid"; spacing: number; width: number; height: number }
  | {
      op: "poly";
      tag: string;
      points: Array<[number, number]>;
      closed: boolean;
      stroke: string;
      fill?: string;
      lineWidth?: number;
    }
  | {
      op: "segment";
      tag: string;
      x1: number;
      y1: number;
      x2: number;
      y2: number;
      stroke: string;
      lineWidth: number;
    }
  | {
      op: "circle";
      tag: string;
      x: number;
      y: number;
      r: number;
      stroke: string;
      fill?: string;
      lineWidth?: number;
    }
  | {
      op: "arrow";
      tag: string;
      x: number;
      y: number;
      /** Screen-space angle in radians (y axis points down). */
      angle: number;
      length: number;
      stroke: string;
      lineWidth?: number;
    }
  | { op: "path"; tag: string; points: Array<[number, number]>; stroke: string; lineWidth: number }
  | { op: "label"; tag: string; x: number; y: number; text: string; color: string; font?: string };

/** World→screen mapping: sx = ox + x*scale, sy = oy - y*scale (y flips). */
export interface Viewport {
  scale: number;
  ox: number;
  oy: number;
  width: number;
  height: number;
}

const MARGIN_PX = 24;
const FALLBACK_SCALE = 60; // px per meter when no world outline is known

const COLORS = {
  wall: "#3b4252",
  regionStrokes: ["#7c9885", "#8d7c98", "#98857c", "#7c8d98"],
  regionFills: [
    "rgba(124,152,133,0.18)",
    "rgba(141,124,152,0.18)",
    "rgba(152,133,124,0.18)",
    "rgba(124,141,152,0.18)",
  ],
  entityTall: "#5e81ac",
  entityLow: "#81a1c1",
  trail: "#d08770",
  robot: "#bf616a",
  heading: "#2e3440",
  targetRay: "#a3be8c",
  gate: "#bf616a",
  label: "#4c566a",
  grid: "#e5e9f0",
};

export function fitViewport(
  bounds: [number, number, number, number],
  width: number,
  height: number,
  margin: number = MARGIN_PX,
): Viewport {
  const [x0, y0, x1, y1] = bounds;
  const spanX = Math.max(x1 - x0, 1e-6);
  const spanY = Math.max(y1 - y0, 1e-6);
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const ox = (width - scale * (x0 + x1)) / 2;
  const oy = (height + scale * (y0 + y1)) / 2;
  return { scale, ox, oy, width, height };
}

function toScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [vp.ox + x * vp.scale, vp.oy - y * vp.scale];
}

/** World-frame angle → screen-frame angle (canvas y points down). */
function toScreenAngle(angle: number): number {
  return -angle;
}

function centroid(points: Array<[number, number]>): [number, number] {
  let sx = 0;
  let sy = 0;
  for (const [x, y] of points) {
    sx += x;
    sy += y;
  }
  const n = Math.max(points.length, 1);
  return [sx / n, sy / n];
}

// ---------------------------------------------------------------------------
// Map
// ---------------------------------------------------------------------------

/**
 * Build the draw list for the map canvas.
 *
 * With a world outline: walls, shaded labeled regions, entities, the pose
 * trail, the robot with a heading arrow, a target-direction ray while an
 * instruction is active, and a stop ring when the approach gate is closed.
 * Without an outline (hello not yet received) the map degrades to a grid
 * with the robot at the center.
 */
export function renderMap(
  hello: SessionHello | null,
  snapshot: Snapshot | null,
  trail: Array<[number, number]>,
  width: number,
  height: number,
): DrawOp[] {
  const ops: DrawOp[] = [{ op: "clear", width, height }];
  const pose: [number, number, number] = snapshot?.pose ?? hello?.origin ?? [0, 0, 0];

  let vp: Viewport;
  if (hello === null) {
    // Grid-only fallback, robot pinned to the canvas center.
    ops.push({ op: "grid", spacing: FALLBACK_SCALE, width, height });
    vp = {
      scale: FALLBACK_SCALE,
      ox: width / 2 - pose[0] * FALLBACK_SCALE,
      oy: height / 2 + pose[1] * FALLBACK_SCALE,
      width,
      height,
    };
  } else {
    vp = fitViewport(hello.world.bounds, width, height);
    const world = hello.world;

    world.regions.forEach((region, i) => {
      const pts = region.polygon.map(([x, y]) => toScreen(vp, x, y));
      ops.push({
        op: "poly",
        tag: "region",
        points: pts,
        closed: true,
        stroke: COLORS.regionStrokes[i % COLORS.regionStrokes.length]!,
        fill: COLORS.regionFills[i % COLORS.regionFills.length]!,
        lineWidth: 1,
      });
      const [cx, cy] = centroid(region.polygon);
      const [sx, sy] = toScreen(vp, cx, cy);
      ops.push({ op: "label", tag: "region-label", x: sx, y: sy, text: region.name, color: COLORS.label });
    });

    for (const [x1, y1, x2, y2] of world.walls) {
      const [sx1, sy1] = toScreen(vp, x1, y1);
      const [sx2, sy2] = toScreen(vp, x2, y2);
      ops.push({ op: "segment", tag: "wall", x1: sx1, y1: sy1, x2: sx2, y2: sy2, stroke: COLORS.wall, lineWidth: 3 });
    }

    for (const entity of world.entities) {
      const color = entity.height === "tall" ? COLORS.entityTall : COLORS.entityLow;
      const shape = entity.shape;
      if (shape.kind === "disc" && shape.center !== undefined && shape.radius !== undefined) {
        const [sx, sy] = toScreen(vp, shape.center[0], shape.center[1]);
        ops.push({ op: "circle", tag: "entity", x: sx, y: sy, r: shape.radius * vp.scale, stroke: color, fill: color + "55" });
        ops.push({ op: "label", tag: "entity-label", x: sx, y: sy - shape.radius * vp.scale - 4, text: entity.label, color: COLORS.label });
      } else if (shape.vertices !== undefined && shape.vertices.length > 0) {
        const pts = shape.vertices.map(([x, y]) => toScreen(vp, x, y));
        ops.push({ op: "poly", tag: "entity", points: pts, closed: true, stroke: color, fill: color + "55", lineWidth: 1 });
        const [cx, cy] = centroid(shape.vertices);
        const [sx, sy] = toScreen(vp, cx, cy);
        ops.push({ op: "label", tag: "entity-label", x: sx, y: sy, text: entity.label, color: COLORS.label });
      }
    }
  }

  if (trail.length > 1) {
    ops.push({
      op: "path",
      tag: "trail",
      points: trail.map(([x, y]) => toScreen(vp, x, y)),
      stroke: COLORS.trail,
      lineWidth: 2,
    });
  }

  const [rx, ry] = toScreen(vp, pose[0], pose[1]);
  const robotR = Math.max(5, 0.08 * vp.scale);
  ops.push({ op: "circle", tag: "robot", x: rx, y: ry, r: robotR, stroke: COLORS.robot, fill: COLORS.robot, lineWidth: 2 });
  ops.push({
    op: "arrow",
    tag: "heading",
    x: rx,
    y: ry,
    angle: toScreenAngle(pose[2]),
    length: robotR * 2.4,
    stroke: COLORS.heading,
    lineWidth: 2,
  });

  if (snapshot !== null && snapshot.instruction !== null) {
    ops.push({
      op: "arrow",
      tag: "target-ray",
      x: rx,
      y: ry,
      angle: toScreenAngle(pose[2] + snapshot.theta),
      length: robotR * 4,
      stroke: COLORS.targetRay,
      lineWidth: 2,
    });
  }

  if (snapshot !== null && snapshot.gated) {
    ops.push({ op: "circle", tag: "gate", x: rx, y: ry, r: robotR * 2, stroke: COLORS.gate, lineWidth: 3 });
    ops.push({ op: "label", tag: "gate-label", x: rx, y: ry - robotR * 2 - 6, text: "HOLD", color: COLORS.gate });
  }

  if (snapshot !== null && snapshot.terminated !== null) {
    ops.push({
      op: "label",
      tag: "terminated",
      x: width / 2,
      y: MARGIN_PX,
      text: `terminated: ${snapshot.terminated}`,
      color: COLORS.gate,
      font: "bold 14px sans-serif",
    });
  }

  return ops;
}

// ---------------------------------------------------------------------------
// Score panel
// ---------------------------------------------------------------------------

export interface ScoreBar {
  /** Verbatim from the snapshot — no rounding, no scaling. */
  value: number;
  /** True when this slice index helped steer the last direction choice. */
  highlighted: boolean;
}

export interface ScoreGroup {
  role: string;
  title: string;
  bars: ScoreBar[];
  /** Scores older than this tick (fallback answered); paint dimmed + badge. */
  stale: boolean;
}

export interface ScorePanel {
  groups: ScoreGroup[];
  nSplit: number;
  staleBadge: boolean;
}

const GROUP_TITLES: Record<string, string> = {
  clip: "region match (clip)",
  detic: "object match (detic)",
  fused: "fused drive",
};

/**
 * Describe the per-slice score bars for the current snapshot.
 *
 * One group per scorer role present in the snapshot plus one for the fused
 * vector, each with exactly `nSplit` bars.  Bar values are the snapshot's
 * numbers untouched.  Contributor slices are highlighted in every group;
 * stale roles are flagged so the paint layer can dim them and badge the
 * panel.  With no snapshot yet, every group renders flat zero bars.
 */
export function renderScores(snapshot: Snapshot | null, nSplit: number): ScorePanel {
  const zeroBars = (): ScoreBar[] =>
    Array.from({ length: nSplit }, () => ({ value: 0, highlighted: false }));

  const contributorSet = new Set<number>();
  if (snapshot !== null) {
    for (const [idx] of snapshot.contributors) {
      contributorSet.add(idx);
    }
  }

  const makeBars = (values: number[] | undefined): ScoreBar[] => {
    if (values === undefined) {
      return zeroBars();
    }
    return Array.from({ length: nSplit }, (_, i) => ({
      value: values[i] ?? 0,
      highlighted: contributorSet.has(i),
    }));
  };

  const groups: ScoreGroup[] = [];
  for (const role of ["clip", "detic"]) {
    groups.push({
      role,
      title: GROUP_TITLES[role]!,
      bars: makeBars(snapshot?.a[role]),
      stale: snapshot?.stale[role] === true,
    });
  }
  groups.push({
    role: "fused",
    title: GROUP_TITLES["fused"]!,
    bars: makeBars(snapshot?.e),
    stale: false,
  });

  return {
    groups,
    nSplit,
    staleBadge: groups.some((g) => g.stale),
  };
}
