/**
 * Overlay drawing: mesh wireframes, stroke paths with direction arrows,
 * rig glyphs, and the wavy-rig sway preview. Pure against a structural
 * subset of CanvasRenderingContext2D so the routines stay testable.
 */

import { MeshPayload, Point, RigSpec, StrokeSpec } from "./protocol.js";

export interface Ctx2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  closePath(): void;
}

export const STROKE_COLORS: Record<string, string> = {
  wind: "#ff9f1c",
  repel: "#e71d36",
  attract: "#2ec4b6",
};

export function drawWireframe(
  ctx: Ctx2D,
  mesh: MeshPayload,
  positions: Point[] | null,
  scale: number,
): void {
  const pts = positions ?? mesh.vertices;
  ctx.strokeStyle = "#4cc9f0";
  ctx.lineWidth = 1;
  for (const [a, b, c] of mesh.triangles) {
    const pa = pts[a];
    const pb = pts[b];
    const pc = pts[c];
    if (!pa || !pb || !pc) {
      continue;
    }
    ctx.beginPath();
    ctx.moveTo(pa[0] * scale, pa[1] * scale);
    ctx.lineTo(pb[0] * scale, pb[1] * scale);
    ctx.lineTo(pc[0] * scale, pc[1] * scale);
    ctx.closePath();
    ctx.stroke();
  }
}

function drawArrowHead(ctx: Ctx2D, at: Point, dir: Point, size: number): void {
  const [dx, dy] = dir;
  const left: Point = [-dy, dx];
  ctx.beginPath();
  ctx.moveTo(at[0], at[1]);
  ctx.lineTo(at[0] - size * dx + 0.4 * size * left[0],
             at[1] - size * dy + 0.4 * size * left[1]);
  ctx.moveTo(at[0], at[1]);
  ctx.lineTo(at[0] - size * dx - 0.4 * size * left[0],
             at[1] - size * dy - 0.4 * size * left[1]);
  ctx.stroke();
}

/** Unit tangents along a polyline, one per sampled arrow position. */
export function arrowAnchors(path: Point[], spacing: number): Array<{ at: Point; dir: Point }> {
  const anchors: Array<{ at: Point; dir: Point }> = [];
  let carried = spacing; // place the first arrow one spacing in
  for (let i = 1; i < path.length; i++) {
    const a = path[i - 1]!;
    const b = path[i]!;
    const len = Math.hypot(b[0] - a[0], b[1] - a[1]);
    if (len === 0) {
      continue;
    }
    const dir: Point = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let along = carried;
    while (along <= len) {
      anchors.push({ at: [a[0] + dir[0] * along, a[1] + dir[1] * along], dir });
      along += spacing;
    }
    carried = along - len;
  }
  return anchors;
}

export function drawStroke(ctx: Ctx2D, stroke: StrokeSpec, scale: number): void {
  const color = STROKE_COLORS[stroke.kind] ?? "#ffffff";
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 2;
  const path = stroke.path;
  if (path.length === 1) {
    const p = path[0]!;
    ctx.beginPath();
    ctx.arc(p[0] * scale, p[1] * scale, 4, 0, 2 * Math.PI);
    ctx.fill();
    return;
  }
  ctx.beginPath();
  const first = path[0]!;
  ctx.moveTo(first[0] * scale, first[1] * scale);
  for (let i = 1; i < path.length; i++) {
    ctx.lineTo(path[i]![0] * scale, path[i]![1] * scale);
  }
  ctx.stroke();
  for (const { at, dir } of arrowAnchors(path, 24 / scale)) {
    drawArrowHead(ctx, [at[0] * scale, at[1] * scale], dir, 7);
  }
}

/** Sample the sway path of a wavy rig over one full period. */
export function wavyPreviewPath(rig: RigSpec, samples = 33): Point[] {
  const amplitude = rig.amplitude ?? 0;
  const [dx, dy] = rig.direction ?? [0, 1];
  const pts: Point[] = [];
  for (let i = 0; i < samples; i++) {
    const phase = (2 * Math.PI * i) / (samples - 1);
    const s = amplitude * Math.sin(phase);
    pts.push([rig.anchor[0] + s * dx, rig.anchor[1] + s * dy]);
  }
  return pts;
}

export function drawRig(ctx: Ctx2D, rig: RigSpec, scale: number): void {
  ctx.fillStyle = "#d90429";
  ctx.strokeStyle = "#d90429";
  ctx.lineWidth = 1.5;
  const [x, y] = rig.anchor;
  ctx.beginPath();
  ctx.arc(x * scale, y * scale, 4, 0, 2 * Math.PI);
  ctx.fill();
  if (rig.kind === "fixed") {
    // pin glyph: a short stem under the dot
    ctx.beginPath();
    ctx.moveTo(x * scale, y * scale);
    ctx.lineTo(x * scale, y * scale + 9);
    ctx.stroke();
  }
  if (rig.kind === "wavy") {
    const preview = wavyPreviewPath(rig);
    ctx.beginPath();
    const first = preview[0]!;
    ctx.moveTo(first[0] * scale, first[1] * scale);
    for (const p of preview) {
      ctx.lineTo(p[0] * scale, p[1] * scale);
    }
    ctx.stroke();
  }
  if (rig.kind === "trajectory" && rig.keyframes && rig.keyframes.length > 1) {
    ctx.beginPath();
    const start = rig.keyframes[0]![1];
    ctx.moveTo(start[0] * scale, start[1] * scale);
    for (const [, p] of rig.keyframes) {
      ctx.lineTo(p[0] * scale, p[1] * scale);
    }
    ctx.stroke();
  }
}
