/** Point-cloud rendering model: colors, legend, projection, canvas drawing. */

import type { Item, Partlet } from "./types.js";

export const UNASSIGNED_COLOR = "#9e9e9e";
export const LOW_CONFIDENCE_THRESHOLD = 0.5;

/** Evenly spaced categorical colors; distinct for any reasonable partlet count. */
export function categoricalColors(n: number): string[] {
  const colors: string[] = [];
  for (let i = 0; i < n; i++) {
    const hue = Math.round((360 * i) / Math.max(n, 1));
    colors.push(`hsl(${hue} 70% ${i % 2 === 0 ? 45 : 60}%)`);
  }
  return colors;
}

/** The partlets a reviewer sees: final ones after a decision, else predictions. */
export function visiblePartlets(item: Item): Partlet[] {
  return item.final_partlets ?? item.prediction.partlets;
}

export interface LegendEntry {
  index: number;
  name: string;
  confFused: number;
  color: string;
  lowConfidence: boolean;
}

export function buildLegend(item: Item): LegendEntry[] {
  const partlets = visiblePartlets(item);
  const colors = categoricalColors(partlets.length);
  return partlets.map((p, index) => ({
    index,
    name: p.name,
    confFused: p.conf_fused,
    color: colors[index],
    lowConfidence: p.conf_fused < LOW_CONFIDENCE_THRESHOLD,
  }));
}

/** Per-point color from partlet membership; later partlets win overlaps. */
export function pointColors(item: Item, numPoints: number): string[] {
  const partlets = visiblePartlets(item);
  const colors = categoricalColors(partlets.length);
  const out = new Array<string>(numPoints).fill(UNASSIGNED_COLOR);
  partlets.forEach((p, index) => {
    for (const i of p.mask_point_indices) {
      if (i >= 0 && i < numPoints) out[i] = colors[index];
    }
  });
  return out;
}

export type Point3 = [number, number, number];

export interface ScreenPoint {
  x: number;
  y: number;
}

/**
 * Orthographic XY projection fitted to the canvas with a margin; y grows
 * downward in screen space. A degenerate (zero-extent) cloud centers.
 */
export function projectPoints(
  points: Point3[],
  width: number,
  height: number,
  margin = 10,
): ScreenPoint[] {
  if (points.length === 0) return [];
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const [x, y] of points) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  const extent = Math.max(maxX - minX, maxY - minY);
  const scale = extent === 0 ? 0 : Math.min(width - 2 * margin, height - 2 * margin) / extent;
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  return points.map(([x, y]) => ({
    x: width / 2 + (x - cx) * scale,
    y: height / 2 - (y - cy) * scale,
  }));
}

/** The subset of CanvasRenderingContext2D the renderer needs (testable). */
export interface DrawContext {
  fillStyle: string | CanvasGradient | CanvasPattern;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, start: number, end: number): void;
  fill(): void;
}

export function renderCloud(
  ctx: DrawContext,
  points: Point3[],
  colors: string[],
  width: number,
  height: number,
  pointRadius = 2,
): void {
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, width, height);
  const screen = projectPoints(points, width, height);
  for (let i = 0; i < screen.length; i++) {
    ctx.fillStyle = colors[i] ?? UNASSIGNED_COLOR;
    ctx.beginPath();
    ctx.arc(screen[i].x, screen[i].y, pointRadius, 0, 2 * Math.PI);
    ctx.fill();
  }
}
