import { describe, expect, it } from "vitest";

import { decimate } from "../src/decimate.js";
import { Point } from "../src/protocol.js";

describe("douglas-peucker decimation", () => {
  it("collapses a straight drag to its endpoints", () => {
    const path: Point[] = Array.from({ length: 101 }, (_, i) => [i, 0.3] as Point);
    const out = decimate(path, 2.0);
    expect(out).toEqual([[0, 0.3], [100, 0.3]]);
  });

  it("keeps corners beyond tolerance", () => {
    const path: Point[] = [[0, 0], [50, 0], [50, 50]];
    const out = decimate(path, 2.0);
    expect(out).toEqual(path);
  });

  it("keeps endpoints of noisy input and stays within tolerance", () => {
    const path: Point[] = [];
    for (let i = 0; i <= 60; i++) {
      path.push([i, Math.sin(i * 0.7) * 1.2]);
    }
    const out = decimate(path, 2.0);
    expect(out[0]).toEqual(path[0]);
    expect(out[out.length - 1]).toEqual(path[path.length - 1]);
    expect(out.length).toBeLessThan(path.length);
    // every dropped point is within tolerance of the simplified polyline
    for (const p of path) {
      let best = Infinity;
      for (let i = 1; i < out.length; i++) {
        const a = out[i - 1]!;
        const b = out[i]!;
        const dx = b[0] - a[0];
        const dy = b[1] - a[1];
        const len2 = dx * dx + dy * dy;
        const t = len2 === 0 ? 0 :
          Math.max(0, Math.min(1, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2));
        best = Math.min(best,
          Math.hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy)));
      }
      expect(best).toBeLessThanOrEqual(2.0 + 1e-9);
    }
  });

  it("passes single points and pairs through", () => {
    expect(decimate([[1, 2]])).toEqual([[1, 2]]);
    expect(decimate([[1, 2], [3, 4]])).toEqual([[1, 2], [3, 4]]);
  });
});
