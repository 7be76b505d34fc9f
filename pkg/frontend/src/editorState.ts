// Annotation workspace state machine.
//
// Works entirely in image space (callers convert screen points through
// the ViewTransform first), so gestures are independent of zoom/pan.
// Each completed gesture yields exactly one Edit carrying the revision
// it was computed against; the server response (or conflict) feeds back
// through applyServer / markConflict.

import type { AnnBoxDoc, AnnotationSetDoc, BBoxDoc, Edit } from "./types.js";
import type { Point } from "./viewTransform.js";

export type EditorPhase = "idle" | "drawing" | "moving" | "resizing" | "conflict";

export type Handle = "nw" | "ne" | "sw" | "se";

export interface ConflictInfo {
  expectedRevision: number;
  currentRevision: number | null;
  staleEdit: Edit;
}

interface DrawGesture {
  kind: "draw";
  start: Point;
  current: Point;
}

interface MoveGesture {
  kind: "move";
  boxId: string;
  origin: BBoxDoc;
  start: Point;
  current: Point;
}

interface ResizeGesture {
  kind: "resize";
  boxId: string;
  origin: BBoxDoc;
  handle: Handle;
  current: Point;
}

type Gesture = DrawGesture | MoveGesture | ResizeGesture;

function normalize(a: Point, b: Point): BBoxDoc {
  return {
    x_min: Math.min(a.x, b.x),
    y_min: Math.min(a.y, b.y),
    x_max: Math.max(a.x, b.x),
    y_max: Math.max(a.y, b.y),
  };
}

function corners(b: BBoxDoc): Record<Handle, Point> {
  return {
    nw: { x: b.x_min, y: b.y_min },
    ne: { x: b.x_max, y: b.y_min },
    sw: { x: b.x_min, y: b.y_max },
    se: { x: b.x_max, y: b.y_max },
  };
}

const OPPOSITE: Record<Handle, Handle> = { nw: "se", ne: "sw", sw: "ne", se: "nw" };

function inside(p: Point, b: BBoxDoc): boolean {
  return p.x >= b.x_min && p.x <= b.x_max && p.y >= b.y_min && p.y <= b.y_max;
}

export class AnnotationEditor {
  private set: AnnotationSetDoc;
  private gesture: Gesture | null = null;
  private conflict: ConflictInfo | null = null;
  selectedBoxId: string | null = null;
  classId = 0;

  constructor(
    set: AnnotationSetDoc,
    private readonly opts: { minBoxSize?: number } = {},
  ) {
    this.set = set;
  }

  get revision(): number {
    return this.set.revision;
  }

  get imageId(): string {
    return this.set.image_id;
  }

  get boxes(): AnnBoxDoc[] {
    return this.set.boxes;
  }

  get phase(): EditorPhase {
    if (this.conflict) return "conflict";
    if (!this.gesture) return "idle";
    return this.gesture.kind === "draw"
      ? "drawing"
      : this.gesture.kind === "move"
        ? "moving"
        : "resizing";
  }

  private get minSize(): number {
    return this.opts.minBoxSize ?? 2;
  }

  private clamp(b: BBoxDoc): BBoxDoc {
    const w = this.set.width;
    const h = this.set.height;
    if (w == null || h == null) return b;
    return {
      x_min: Math.min(Math.max(b.x_min, 0), w),
      y_min: Math.min(Math.max(b.y_min, 0), h),
      x_max: Math.min(Math.max(b.x_max, 0), w),
      y_max: Math.min(Math.max(b.y_max, 0), h),
    };
  }

  /** Corner handle under the pointer, if any; tolerance in image units. */
  hitHandle(p: Point, tolerance: number): { boxId: string; handle: Handle } | null {
    for (let i = this.set.boxes.length - 1; i >= 0; i--) {
      const box = this.set.boxes[i];
      const cs = corners(box.bbox);
      for (const handle of ["nw", "ne", "sw", "se"] as Handle[]) {
        const c = cs[handle];
        if (Math.abs(p.x - c.x) <= tolerance && Math.abs(p.y - c.y) <= tolerance) {
          return { boxId: box.box_id, handle };
        }
      }
    }
    return null;
  }

  /** Topmost box containing the point, if any. */
  hitBox(p: Point): string | null {
    for (let i = this.set.boxes.length - 1; i >= 0; i--) {
      if (inside(p, this.set.boxes[i].bbox)) return this.set.boxes[i].box_id;
    }
    return null;
  }

  pointerDown(p: Point, handleTolerance: number): void {
    if (this.conflict) return; // frozen until resolved
    const onHandle = this.hitHandle(p, handleTolerance);
    if (onHandle) {
      const box = this.set.boxes.find((b) => b.box_id === onHandle.boxId)!;
      this.selectedBoxId = onHandle.boxId;
      this.gesture = {
        kind: "resize",
        boxId: onHandle.boxId,
        origin: box.bbox,
        handle: onHandle.handle,
        current: p,
      };
      return;
    }
    const over = this.hitBox(p);
    if (over) {
      const box = this.set.boxes.find((b) => b.box_id === over)!;
      this.selectedBoxId = over;
      this.gesture = { kind: "move", boxId: over, origin: box.bbox, start: p, current: p };
      return;
    }
    this.selectedBoxId = null;
    this.gesture = { kind: "draw", start: p, current: p };
  }

  pointerMove(p: Point): void {
    if (this.gesture) this.gesture.current = p;
  }

  /** Box to render while a gesture is in flight. */
  previewBox(): BBoxDoc | null {
    const g = this.gesture;
    if (!g) return null;
    if (g.kind === "draw") return this.clamp(normalize(g.start, g.current));
    if (g.kind === "move") return this.movedBox(g);
    return this.resizedBox(g);
  }

  private movedBox(g: MoveGesture): BBoxDoc {
    const dx = g.current.x - g.start.x;
    const dy = g.current.y - g.start.y;
    let x_min = g.origin.x_min + dx;
    let y_min = g.origin.y_min + dy;
    const w = g.origin.x_max - g.origin.x_min;
    const h = g.origin.y_max - g.origin.y_min;
    if (this.set.width != null) {
      x_min = Math.min(Math.max(x_min, 0), this.set.width - w);
    }
    if (this.set.height != null) {
      y_min = Math.min(Math.max(y_min, 0), this.set.height - h);
    }
    return { x_min, y_min, x_max: x_min + w, y_max: y_min + h };
  }

  private resizedBox(g: ResizeGesture): BBoxDoc {
    const anchor = corners(g.origin)[OPPOSITE[g.handle]];
    return this.clamp(normalize(anchor, g.current));
  }

  /** Finish the gesture; returns the single edit to commit, if any. */
  pointerUp(p: Point): Edit | null {
    const g = this.gesture;
    if (!g) return null;
    g.current = p;
    const expected = this.set.revision;
    this.gesture = null;

    if (g.kind === "draw") {
      const bbox = this.clamp(normalize(g.start, g.current));
      if (bbox.x_max - bbox.x_min < this.minSize || bbox.y_max - bbox.y_min < this.minSize) {
        return null; // click or sliver: not an annotation
      }
      return { op: "add", bbox, class_id: this.classId, expected_revision: expected };
    }
    if (g.kind === "move") {
      const moved = this.movedBox(g);
      if (moved.x_min === g.origin.x_min && moved.y_min === g.origin.y_min) return null;
      return { op: "adjust", box_id: g.boxId, new_bbox: moved, expected_revision: expected };
    }
    const resized = this.resizedBox(g);
    if (resized.x_max - resized.x_min < this.minSize || resized.y_max - resized.y_min < this.minSize) {
      return null;
    }
    return { op: "adjust", box_id: g.boxId, new_bbox: resized, expected_revision: expected };
  }

  deleteSelected(): Edit | null {
    if (this.conflict || !this.selectedBoxId) return null;
    const edit: Edit = {
      op: "remove",
      box_id: this.selectedBoxId,
      expected_revision: this.set.revision,
    };
    this.selectedBoxId = null;
    return edit;
  }

  /** Server accepted an edit (or a fresh set was loaded). */
  applyServer(set: AnnotationSetDoc): void {
    this.set = set;
    this.conflict = null;
    if (this.selectedBoxId && !set.boxes.some((b) => b.box_id === this.selectedBoxId)) {
      this.selectedBoxId = null;
    }
  }

  /** Server rejected an edit as stale: freeze and surface the conflict. */
  markConflict(staleEdit: Edit, currentRevision: number | null): void {
    this.gesture = null;
    this.conflict = {
      expectedRevision: staleEdit.expected_revision,
      currentRevision,
      staleEdit,
    };
  }

  conflictInfo(): ConflictInfo | null {
    return this.conflict;
  }

  /**
   * Resolve a conflict by reloading the authoritative set and re-basing
   * the stale edit on it. Add edits always re-apply; adjust/remove only
   * if the target box still exists. Returns the edit to retry, or null
   * when the reload alone resolves it.
   */
  reloadAndReapply(fresh: AnnotationSetDoc): Edit | null {
    const stale = this.conflict?.staleEdit ?? null;
    this.applyServer(fresh);
    if (!stale) return null;
    if (stale.op === "add") {
      return { ...stale, expected_revision: fresh.revision };
    }
    const target = stale.op === "remove" ? stale.box_id : stale.box_id;
    if (!fresh.boxes.some((b) => b.box_id === target)) return null;
    return { ...stale, expected_revision: fresh.revision };
  }
}
