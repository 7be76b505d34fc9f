// Canvas painting: image, stored annotations, suggestion overlays, and
// the in-flight gesture preview. Pure drawing; no state of its own.

import type { AnnBoxDoc, BBoxDoc, DetectionDoc } from "./types.js";
import type { ViewTransform } from "./viewTransform.js";

const COLORS: Record<string, string> = {
  human: "#2e9e5b",
  model_accepted: "#2573c4",
  model_suggested: "#e0a716",
  selected: "#e45d4a",
  preview: "#9b59b6",
};

const HANDLE_PX = 7;

function strokeBox(
  ctx: CanvasRenderingContext2D,
  view: ViewTransform,
  bbox: BBoxDoc,
  color: string,
  dashed = false,
): { x: number; y: number; w: number; h: number } {
  const tl = view.imageToScreen({ x: bbox.x_min, y: bbox.y_min });
  const w = (bbox.x_max - bbox.x_min) * view.zoom;
  const h = (bbox.y_max - bbox.y_min) * view.zoom;
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.setLineDash(dashed ? [6, 4] : []);
  ctx.strokeRect(tl.x, tl.y, w, h);
  ctx.restore();
  return { x: tl.x, y: tl.y, w, h };
}

function drawHandles(ctx: CanvasRenderingContext2D, r: { x: number; y: number; w: number; h: number }, color: string) {
  ctx.save();
  ctx.fillStyle = color;
  const half = HANDLE_PX / 2;
  for (const [cx, cy] of [
    [r.x, r.y], [r.x + r.w, r.y], [r.x, r.y + r.h], [r.x + r.w, r.y + r.h],
  ]) {
    ctx.fillRect(cx - half, cy - half, HANDLE_PX, HANDLE_PX);
  }
  ctx.restore();
}

function drawBadge(ctx: CanvasRenderingContext2D, x: number, y: number, text: string, color: string) {
  ctx.save();
  ctx.font = "12px system-ui, sans-serif";
  const padding = 3;
  const width = ctx.measureText(text).width + padding * 2;
  const top = Math.max(y - 16, 0);
  ctx.fillStyle = color;
  ctx.fillRect(x, top, width, 15);
  ctx.fillStyle = "#fff";
  ctx.fillText(text, x + padding, top + 11);
  ctx.restore();
}

export interface Scene {
  image: CanvasImageSource | null;
  imageWidth: number;
  imageHeight: number;
  boxes: AnnBoxDoc[];
  selectedBoxId: string | null;
  suggestions: DetectionDoc[];
  preview: BBoxDoc | null;
}

export function renderScene(
  ctx: CanvasRenderingContext2D,
  view: ViewTransform,
  scene: Scene,
): void {
  const canvas = ctx.canvas;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#1c1f24";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  if (scene.image) {
    const tl = view.imageToScreen({ x: 0, y: 0 });
    ctx.imageSmoothingEnabled = view.zoom < 3;
    ctx.drawImage(
      scene.image,
      tl.x, tl.y,
      scene.imageWidth * view.zoom,
      scene.imageHeight * view.zoom,
    );
  }

  for (const box of scene.boxes) {
    const selected = box.box_id === scene.selectedBoxId;
    const color = selected ? COLORS.selected : COLORS[box.provenance] ?? COLORS.human;
    const r = strokeBox(ctx, view, box.bbox, color);
    if (selected) drawHandles(ctx, r, color);
  }

  for (const det of scene.suggestions) {
    const r = strokeBox(ctx, view, det.bbox, COLORS.model_suggested, true);
    drawBadge(ctx, r.x, r.y, `${(det.confidence * 100).toFixed(0)}%`, COLORS.model_suggested);
  }

  if (scene.preview) {
    strokeBox(ctx, view, scene.preview, COLORS.preview, true);
  }
}
