// Zoom/pan mapping between image space and screen space.
//
// Image space is the single source of truth: every stored box lives
// there, and the visible rect is just `imageToScreen` applied at render
// time. The map is affine and strictly invertible for any zoom > 0, so
// gestures land at the same image coordinates regardless of the view.

export interface Point {
  x: number;
  y: number;
}

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

const MIN_ZOOM = 0.05;
const MAX_ZOOM = 40;

export class ViewTransform {
  zoom: number;
  offsetX: number;
  offsetY: number;

  constructor(zoom = 1, offsetX = 0, offsetY = 0) {
    if (zoom <= 0) throw new RangeError(`zoom must be positive, got ${zoom}`);
    this.zoom = zoom;
    this.offsetX = offsetX;
    this.offsetY = offsetY;
  }

  imageToScreen(p: Point): Point {
    return { x: p.x * this.zoom + this.offsetX, y: p.y * this.zoom + this.offsetY };
  }

  screenToImage(p: Point): Point {
    return { x: (p.x - this.offsetX) / this.zoom, y: (p.y - this.offsetY) / this.zoom };
  }

  rectToScreen(r: Rect): Rect {
    const tl = this.imageToScreen({ x: r.x, y: r.y });
    return { x: tl.x, y: tl.y, width: r.width * this.zoom, height: r.height * this.zoom };
  }

  /** Zoom by `factor` keeping the screen point `anchor` fixed. */
  zoomAt(anchor: Point, factor: number): void {
    const next = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, this.zoom * factor));
    const actual = next / this.zoom;
    this.offsetX = anchor.x - (anchor.x - this.offsetX) * actual;
    this.offsetY = anchor.y - (anchor.y - this.offsetY) * actual;
    this.zoom = next;
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  /** Fit an image of the given size into a viewport, centered. */
  fitTo(imageWidth: number, imageHeight: number, viewportWidth: number, viewportHeight: number): void {
    const scale = Math.min(viewportWidth / imageWidth, viewportHeight / imageHeight);
    this.zoom = Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, scale));
    this.offsetX = (viewportWidth - imageWidth * this.zoom) / 2;
    this.offsetY = (viewportHeight - imageHeight * this.zoom) / 2;
  }
}
