import { describe, expect, it } from "vitest";

import { ViewTransform } from "../src/viewTransform.js";

describe("ViewTransform", () => {
  it("round-trips points for any zoom/pan", () => {
    let seed = 12345;
    const rand = () => ((seed = (seed * 1103515245 + 12345) % 2 ** 31) / 2 ** 31);
    for (let k = 0; k < 200; k++) {
      const t = new ViewTransform(0.05 + rand() * 20, rand() * 800 - 400, rand() * 800 - 400);
      const p = { x: rand() * 2048, y: rand() * 1536 };
      const back = t.screenToImage(t.imageToScreen(p));
      expect(back.x).toBeCloseTo(p.x, 6);
      expect(back.y).toBeCloseTo(p.y, 6);
      const fwd = t.imageToScreen(t.screenToImage(p));
      expect(fwd.x).toBeCloseTo(p.x, 6);
      expect(fwd.y).toBeCloseTo(p.y, 6);
    }
  });

  it("is strictly monotone, so distinct points stay distinct", () => {
    const t = new ViewTransform(2.5, 13, -7);
    const a = t.imageToScreen({ x: 10, y: 10 });
    const b = t.imageToScreen({ x: 10.001, y: 10 });
    expect(b.x).toBeGreaterThan(a.x);
  });

  it("rejects non-positive zoom", () => {
    expect(() => new ViewTransform(0)).toThrow(RangeError);
    expect(() => new ViewTransform(-1)).toThrow(RangeError);
  });

  it("zoomAt keeps the anchor fixed", () => {
    const t = new ViewTransform(1, 0, 0);
    const anchor = { x: 320, y: 240 };
    const before = t.screenToImage(anchor);
    t.zoomAt(anchor, 2.0);
    const after = t.screenToImage(anchor);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
    expect(t.zoom).toBeCloseTo(2.0);
  });

  it("clamps zoom to sane bounds", () => {
    const t = new ViewTransform(1, 0, 0);
    t.zoomAt({ x: 0, y: 0 }, 1e9);
    expect(t.zoom).toBeLessThanOrEqual(40);
    t.zoomAt({ x: 0, y: 0 }, 1e-12);
    expect(t.zoom).toBeGreaterThan(0);
  });

  it("fitTo centers the image", () => {
    const t = new ViewTransform();
    t.fitTo(2048, 1536, 1024, 768);
    expect(t.zoom).toBeCloseTo(0.5);
    expect(t.offsetX).toBeCloseTo(0);
    expect(t.offsetY).toBeCloseTo(0);
    t.fitTo(100, 200, 400, 400);
    expect(t.zoom).toBeCloseTo(2);
    expect(t.offsetX).toBeCloseTo(100);
    expect(t.offsetY).toBeCloseTo(0);
  });

  it("rect mapping agrees with point mapping", () => {
    const t = new ViewTransform(3, -20, 14);
    const r = t.rectToScreen({ x: 5, y: 6, width: 10, height: 20 });
    const tl = t.imageToScreen({ x: 5, y: 6 });
    const br = t.imageToScreen({ x: 15, y: 26 });
    expect(r.x).toBeCloseTo(tl.x);
    expect(r.y).toBeCloseTo(tl.y);
    expect(r.x + r.width).toBeCloseTo(br.x);
    expect(r.y + r.height).toBeCloseTo(br.y);
  });
});
