// Detection review: overlays from the last inference, a client-side
// confidence slider (no re-inference), and accept bookkeeping.

import type { DetectionDoc, InferenceResultDoc } from "./types.js";

export class ReviewState {
  private detections: DetectionDoc[] = [];
  private dismissed = new Set<number>();
  modelId: string | null = null;
  threshold = 0;

  loadResult(result: InferenceResultDoc): void {
    this.detections = result.detections;
    this.modelId = result.model_id;
    this.dismissed.clear();
  }

  clear(): void {
    this.detections = [];
    this.modelId = null;
    this.dismissed.clear();
  }

  get count(): number {
    return this.detections.length;
  }

  /** Overlays at the current slider position (model_suggested boxes). */
  visible(): DetectionDoc[] {
    return this.detections.filter(
      (d, i) => !this.dismissed.has(i) && d.confidence >= this.threshold,
    );
  }

  dismiss(index: number): void {
    const vis = this.visibleIndices();
    if (index >= 0 && index < vis.length) this.dismissed.add(vis[index]);
  }

  private visibleIndices(): number[] {
    const out: number[] = [];
    this.detections.forEach((d, i) => {
      if (!this.dismissed.has(i) && d.confidence >= this.threshold) out.push(i);
    });
    return out;
  }

  /** Payload for accepting every visible suggestion in one edit. */
  acceptAllPayload(): DetectionDoc[] {
    return this.visible();
  }

  /** Payload for accepting a single visible suggestion. */
  acceptOnePayload(index: number): DetectionDoc[] {
    const vis = this.visible();
    return index >= 0 && index < vis.length ? [vis[index]] : [];
  }

  /** After the server stored accepted boxes, drop them from the overlay. */
  markAccepted(accepted: DetectionDoc[]): void {
    const keys = new Set(accepted.map((d) => JSON.stringify(d.bbox)));
    this.detections.forEach((d, i) => {
      if (keys.has(JSON.stringify(d.bbox))) this.dismissed.add(i);
    });
  }
}
