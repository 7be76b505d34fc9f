// Benchmark dashboard geometry: pure builders that turn report JSON
// into bar/line coordinates, rendered as SVG by the page layer.

import type { EvalReportDoc, LossSeriesDoc } from "./types.js";

export interface Bar {
  modelId: string;
  value: number; // mAP@50 in [0, 1]
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface ChartSize {
  width: number;
  height: number;
  padding?: number;
}

/** Ranking order: mAP@50 descending, ties by model id. */
export function rankReports(reports: EvalReportDoc[]): EvalReportDoc[] {
  return [...reports].sort(
    (a, b) => b.map_at_50 - a.map_at_50 || a.model_id.localeCompare(b.model_id),
  );
}

export function buildBars(reports: EvalReportDoc[], size: ChartSize): Bar[] {
  const pad = size.padding ?? 24;
  const ranked = rankReports(reports);
  if (ranked.length === 0) return [];
  const innerW = size.width - pad * 2;
  const innerH = size.height - pad * 2;
  const slot = innerW / ranked.length;
  const barW = Math.min(slot * 0.7, 90);
  return ranked.map((r, i) => {
    const h = Math.max(innerH * r.map_at_50, 0);
    return {
      modelId: r.model_id,
      value: r.map_at_50,
      x: pad + slot * i + (slot - barW) / 2,
      y: pad + innerH - h,
      width: barW,
      height: h,
    };
  });
}

export interface LossPolyline {
  modelId: string;
  split: "train" | "val";
  points: { x: number; y: number }[];
  path: string; // SVG path data
}

export function buildLossLines(series: LossSeriesDoc[], size: ChartSize): LossPolyline[] {
  const pad = size.padding ?? 24;
  const all = series.flatMap((s) => s.points);
  if (all.length === 0) return [];
  const maxEpoch = Math.max(...all.map((p) => p.epoch));
  const minEpoch = Math.min(...all.map((p) => p.epoch));
  const maxLoss = Math.max(...all.map((p) => p.loss), 1e-9);
  const spanEpoch = Math.max(maxEpoch - minEpoch, 1);
  const innerW = size.width - pad * 2;
  const innerH = size.height - pad * 2;

  const lines: LossPolyline[] = [];
  for (const s of series) {
    for (const split of ["train", "val"] as const) {
      const pts = s.points
        .filter((p) => p.split === split)
        .map((p) => ({
          x: pad + ((p.epoch - minEpoch) / spanEpoch) * innerW,
          y: pad + innerH - (p.loss / maxLoss) * innerH,
        }));
      if (pts.length === 0) continue;
      const path = pts
        .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(2)},${p.y.toFixed(2)}`)
        .join(" ");
      lines.push({ modelId: s.model_id, split, points: pts, path });
    }
  }
  return lines;
}

export function formatPercent(value: number): string {
  return `${(value * 100).toFixed(2)}%`;
}
