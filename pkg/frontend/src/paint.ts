/**
 * Canvas paint layer: replays draw ops and score panels onto 2D contexts.
 *
 * Deliberately dumb — every decision about *what* to draw lives in
 * render.ts; this file only knows how to turn those descriptions into
 * canvas API calls.
 */

import { DrawOp } from "./render.js";
import { ScorePanel } from "./render.js";

const BG = "#fbfbfd";
const BAR_COLOR = "#5e81ac";
const BAR_HIGHLIGHT = "#bf616a";
const AXIS_COLOR = "#d8dee9";
const TEXT_COLOR = "#4c566a";
const STALE_ALPHA = 0.35;

export function applyOps(ctx: CanvasRenderingContext2D, ops: DrawOp[]): void {
  for (const op of ops) {
    switch (op.op) {
      case "clear":
        ctx.fillStyle = BG;
        ctx.fillRect(0, 0, op.width, op.height);
        break;
      case "grid": {
        ctx.strokeStyle = "#e5e9f0";
        ctx.lineWidth = 1;
        ctx.beginPath();
        for (let x = op.spacing / 2; x < op.width; x += op.spacing) {
          ctx.moveTo(x, 0);
          ctx.lineTo(x, op.height);
        }
        for (let y = op.spacing / 2; y < op.height; y += op.spacing) {
          ctx.moveTo(0, y);
          ctx.lineTo(op.width, y);
        }
        ctx.stroke();
        break;
      }
      case "poly": {
        ctx.beginPath();
        op.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        if (op.closed) {
          ctx.closePath();
        }
        if (op.fill !== undefined) {
          ctx.fillStyle = op.fill;
          ctx.fill();
        }
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.lineWidth ?? 1;
        ctx.stroke();
        break;
      }
      case "segment":
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.lineWidth;
        ctx.beginPath();
        ctx.moveTo(op.x1, op.y1);
        ctx.lineTo(op.x2, op.y2);
        ctx.stroke();
        break;
      case "circle":
        ctx.beginPath();
        ctx.arc(op.x, op.y, op.r, 0, Math.PI * 2);
        if (op.fill !== undefined) {
          ctx.fillStyle = op.fill;
          ctx.fill();
        }
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.lineWidth ?? 1;
        ctx.stroke();
        break;
      case "arrow": {
        const tipX = op.x + Math.cos(op.angle) * op.length;
        const tipY = op.y + Math.sin(op.angle) * op.length;
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.lineWidth ?? 2;
        ctx.beginPath();
        ctx.moveTo(op.x, op.y);
        ctx.lineTo(tipX, tipY);
        const back = op.angle + Math.PI;
        const barb = 0.4;
        const barbLen = Math.min(8, op.length * 0.35);
        ctx.moveTo(tipX, tipY);
        ctx.lineTo(tipX + Math.cos(back - barb) * barbLen, tipY + Math.sin(back - barb) * barbLen);
        ctx.moveTo(tipX, tipY);
        ctx.lineTo(tipX + Math.cos(back + barb) * barbLen, tipY + Math.sin(back + barb) * barbLen);
        ctx.stroke();
        break;
      }
      case "path":
        ctx.strokeStyle = op.stroke;
        ctx.lineWidth = op.lineWidth;
        ctx.beginPath();
        op.points.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
        ctx.stroke();
        break;
      case "label":
        ctx.fillStyle = op.color;
        ctx.font = op.font ?? "11px sans-serif";
        ctx.textAlign = "center";
        ctx.fillText(op.text, op.x, op.y);
        break;
    }
  }
}

/** Paint the per-slice bar groups described by a ScorePanel. */
export function paintScores(
  ctx: CanvasRenderingContext2D,
  panel: ScorePanel,
  width: number,
  height: number,
): void {
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, width, height);

  const groupH = height / panel.groups.length;
  const padX = 56;
  const padTop = 18;
  const padBottom = 14;

  panel.groups.forEach((group, gi) => {
    const top = gi * groupH;
    const plotH = groupH - padTop - padBottom;
    const plotW = width - padX - 12;
    const slotW = plotW / Math.max(panel.nSplit, 1);

    ctx.save();
    if (group.stale) {
      ctx.globalAlpha = STALE_ALPHA;
    }

    ctx.fillStyle = TEXT_COLOR;
    ctx.font = "12px sans-serif";
    ctx.textAlign = "left";
    ctx.fillText(group.title, 8, top + 13);

    ctx.strokeStyle = AXIS_COLOR;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(padX, top + padTop + plotH);
    ctx.lineTo(padX + plotW, top + padTop + plotH);
    ctx.stroke();

    group.bars.forEach((bar, i) => {
      const h = Math.max(0, Math.min(1, bar.value)) * plotH;
      const x = padX + i * slotW + slotW * 0.15;
      const w = slotW * 0.7;
      ctx.fillStyle = bar.highlighted ? BAR_HIGHLIGHT : BAR_COLOR;
      ctx.fillRect(x, top + padTop + plotH - h, w, h);
      ctx.fillStyle = TEXT_COLOR;
      ctx.font = "9px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(String(i), x + w / 2, top + padTop + plotH + 10);
    });
    ctx.restore();

    if (group.stale) {
      ctx.fillStyle = BAR_HIGHLIGHT;
      ctx.font = "bold 11px sans-serif";
      ctx.textAlign = "right";
      ctx.fillText("STALE", width - 10, top + 13);
    }
  });
}
