import { describe, expect, it } from "vitest";

import {
  buildLegend,
  categoricalColors,
  pointColors,
  projectPoints,
  renderCloud,
  UNASSIGNED_COLOR,
  type DrawContext,
  type Point3,
} from "../src/render.js";
import type { Item, Partlet } from "../src/types.js";

function partlet(name: string, conf: number, indices: number[]): Partlet {
  return {
    name,
    conf_soft: conf,
    conf_maha: conf,
    conf_fused: conf,
    mask_point_indices: indices,
  };
}

function item(partlets: Partlet[], lowConfidence = false): Item {
  return {
    shape_id: "s1",
    status: "LEASED",
    low_confidence: lowConfidence,
    avg_fused_conf: 0.7,
    revision: 0,
    prediction: { shape_id: "s1", category: "chair", partlets, unlabeled_count: 0 },
    lease: { reviewer: "r", granted: 0, expiry: 600 },
    final_partlets: null,
    review_duration: 0,
  };
}

describe("legend", () => {
  it("lists one entry per partlet with distinct colors", () => {
    const fixture = item([
      partlet("seat", 0.9, [0]),
      partlet("leg", 0.8, [1]),
      partlet("backrest", 0.7, [2]),
      partlet("armrest", 0.6, [3]),
    ]);
    const legend = buildLegend(fixture);
    expect(legend).toHaveLength(4);
    expect(new Set(legend.map((e) => e.color)).size).toBe(4);
    expect(legend.map((e) => e.name)).toEqual(["seat", "leg", "backrest", "armrest"]);
  });

  it("flags low-confidence partlets", () => {
    const legend = buildLegend(item([partlet("seat", 0.3, [0]), partlet("leg", 0.9, [1])]));
    expect(legend[0].lowConfidence).toBe(true);
    expect(legend[1].lowConfidence).toBe(false);
  });
});

describe("categoricalColors", () => {
  it("produces n distinct colors", () => {
    for (const n of [1, 4, 12, 32]) {
      expect(new Set(categoricalColors(n)).size).toBe(n);
    }
  });
});

describe("pointColors", () => {
  it("colors masked points and greys the rest", () => {
    const colors = pointColors(item([partlet("seat", 0.9, [0, 2])]), 4);
    expect(colors[0]).toBe(colors[2]);
    expect(colors[0]).not.toBe(UNASSIGNED_COLOR);
    expect(colors[1]).toBe(UNASSIGNED_COLOR);
    expect(colors[3]).toBe(UNASSIGNED_COLOR);
  });
});

describe("projectPoints", () => {
  it("fits the cloud inside the canvas with the margin respected", () => {
    const pts: Point3[] = [[-1, -1, 0], [1, 1, 0], [0, 0, 5]];
    const screen = projectPoints(pts, 200, 100, 10);
    for (const p of screen) {
      expect(p.x).toBeGreaterThanOrEqual(10);
      expect(p.x).toBeLessThanOrEqual(190);
      expect(p.y).toBeGreaterThanOrEqual(10);
      expect(p.y).toBeLessThanOrEqual(90);
    }
  });

  it("flips y so larger world-y is higher on screen", () => {
    const screen = projectPoints([[0, 0, 0], [0, 1, 0]], 100, 100);
    expect(screen[1].y).toBeLessThan(screen[0].y);
  });

  it("centers a degenerate cloud", () => {
    expect(projectPoints([[3, 3, 3]], 100, 80)).toEqual([{ x: 50, y: 40 }]);
  });
});

describe("renderCloud", () => {
  it("draws background plus one dot per point in the given colors", () => {
    const calls: string[] = [];
    let current = "";
    const ctx: DrawContext = {
      get fillStyle() { return current; },
      set fillStyle(v: string | CanvasGradient | CanvasPattern) { current = String(v); },
      fillRect: () => calls.push(`rect:${current}`),
      beginPath: () => calls.push("begin"),
      arc: () => calls.push(`arc:${current}`),
      fill: () => calls.push("fill"),
    };
    renderCloud(ctx, [[0, 0, 0], [1, 1, 0]], ["red", "blue"], 100, 100);
    expect(calls[0]).toBe("rect:#111");
    expect(calls.filter((c) => c.startsWith("arc"))).toEqual(["arc:red", "arc:blue"]);
    expect(calls.filter((c) => c === "fill")).toHaveLength(2);
  });
});
