/** Douglas-Peucker polyline decimation for freehand stroke input. */

import { Point } from "./protocol.js";

function perpendicularDistance(p: Point, a: Point, b: Point): number {
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const len = Math.hypot(dx, dy);
  if (len === 0) {
    return Math.hypot(p[0] - a[0], p[1] - a[1]);
  }
  return Math.abs(dx * (a[1] - p[1]) - dy * (a[0] - p[0])) / len;
}

export function decimate(points: Point[], tolerance = 2.0): Point[] {
  if (points.length <= 2) {
    return points.slice();
  }
  const first = points[0]!;
  const last = points[points.length - 1]!;
  let maxDist = -1;
  let index = 0;
  for (let i = 1; i < points.length - 1; i++) {
    const d = perpendicularDistance(points[i]!, first, last);
    if (d > maxDist) {
      maxDist = d;
      index = i;
    }
  }
  if (maxDist <= tolerance) {
    return [first, last];
  }
  const left = decimate(points.slice(0, index + 1), tolerance);
  const right = decimate(points.slice(index), tolerance);
  return left.slice(0, -1).concat(right);
}
