/** Canvas drawing for boxes, center curves, and overlays. */

import type { Box, Method, TransformResponse } from "./types.js";
import { METHOD_COLORS } from "./types.js";

export interface PixelRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Normalized center-extent box to canvas pixels. */
export function boxToRect(box: Box, width: number, height: number): PixelRect {
  return {
    x: (box[0] - box[2] / 2) * width,
    y: (box[1] - box[3] / 2) * height,
    w: box[2] * width,
    h: box[3] * height,
  };
}

/** Canvas pixel rectangle (any drag direction) to a normalized box. */
export function rectToBox(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  width: number,
  height: number,
): Box {
  const lo = [Math.min(x0, x1) / width, Math.min(y0, y1) / height];
  const hi = [Math.max(x0, x1) / width, Math.max(y0, y1) / height];
  return [
    (lo[0]! + hi[0]!) / 2,
    (lo[1]! + hi[1]!) / 2,
    hi[0]! - lo[0]!,
    hi[1]! - lo[1]!,
  ];
}

export function drawBox(
  ctx: CanvasRenderingContext2D,
  box: Box,
  color: string,
  dashed: boolean,
  lineWidth = 2,
): void {
  const r = boxToRect(box, ctx.canvas.width, ctx.canvas.height);
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = lineWidth;
  ctx.setLineDash(dashed ? [6, 4] : []);
  ctx.strokeRect(r.x, r.y, r.w, r.h);
  ctx.restore();
}

/** Poly-line through box centers, the designed-path convention. */
export function drawCenterCurve(
  ctx: CanvasRenderingContext2D,
  path: Box[] | number[][],
  color: string,
): void {
  if (path.length < 2) return;
  const { width, height } = ctx.canvas;
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.moveTo(path[0]![0]! * width, path[0]![1]! * height);
  for (let i = 1; i < path.length; i++) {
    ctx.lineTo(path[i]![0]! * width, path[i]![1]! * height);
  }
  ctx.stroke();
  ctx.restore();
}

/** Designed path: solid box at the first key, dashed at the last. */
export function drawDesignedPath(ctx: CanvasRenderingContext2D, preview: Box[]): void {
  if (preview.length === 0) return;
  const color = "#f4d35e";
  drawCenterCurve(ctx, preview, color);
  drawBox(ctx, preview[0]!, color, false);
  if (preview.length > 1) drawBox(ctx, preview[preview.length - 1]!, color, true);
}

/** One method's prediction at the scrubbed frame plus its center trace. */
export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  method: Method,
  response: TransformResponse,
  frame: number,
): void {
  const color = METHOD_COLORS[method];
  drawCenterCurve(ctx, response.b_tgt, color);
  const row = response.b_tgt[Math.min(frame, response.b_tgt.length - 1)];
  if (row !== undefined) {
    drawBox(ctx, [row[0]!, row[1]!, row[2]!, row[3]!], color, false, 2.5);
  }
}
