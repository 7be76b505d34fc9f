import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, isRevisionConflict } from "../src/api.js";

function mockFetch(status: number, payload: unknown) {
  const fn = vi.fn(async () => ({
    ok: status >= 200 && status < 300,
    status,
    text: async () => JSON.stringify(payload),
  }));
  vi.stubGlobal("fetch", fn);
  return fn;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("ApiClient", () => {
  it("PUTs edits to the annotation endpoint", async () => {
    const fn = mockFetch(200, { image_id: "a", revision: 1, boxes: [], width: 1, height: 1 });
    const api = new ApiClient();
    const edit = {
      op: "add" as const,
      bbox: { x_min: 0, y_min: 0, x_max: 5, y_max: 5 },
      class_id: 0,
      expected_revision: 0,
    };
    await api.putEdit("img 1", edit);
    expect(fn).toHaveBeenCalledTimes(1);
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/api/annotations/img%201");
    expect(init.method).toBe("PUT");
    expect(JSON.parse(init.body as string)).toEqual(edit);
  });

  it("maps error bodies onto ApiError", async () => {
    mockFetch(409, {
      code: "revision_conflict",
      message: "stale",
      details: { current_revision: 4 },
    });
    const api = new ApiClient();
    const err = await api
      .putEdit("img1", { op: "remove", box_id: "b", expected_revision: 0 })
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe("revision_conflict");
    expect(err.details).toEqual({ current_revision: 4 });
    expect(isRevisionConflict(err)).toBe(true);
    expect(isRevisionConflict(new Error("x"))).toBe(false);
  });

  it("sends accept payloads with the expected revision", async () => {
    const fn = mockFetch(200, { image_id: "a", revision: 2, boxes: [], width: 1, height: 1 });
    const api = new ApiClient();
    const det = {
      bbox: { x_min: 0, y_min: 0, x_max: 2, y_max: 2 },
      class_id: 0,
      confidence: 0.9,
    };
    await api.acceptDetections("img1", [det], 1);
    const [url, init] = fn.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("/api/annotations/img1/accept");
    expect(JSON.parse(init.body as string)).toEqual({
      detections: [det],
      expected_revision: 1,
    });
  });

  it("unwraps list envelopes", async () => {
    mockFetch(200, { models: [{ model_id: "m", active: true }] });
    const api = new ApiClient();
    const models = await api.listModels();
    expect(models).toHaveLength(1);
    expect(models[0].model_id).toBe("m");
  });

  it("builds raw image URLs without fetching", () => {
    const api = new ApiClient("http://127.0.0.1:8471");
    expect(api.imageRawUrl("slide 1")).toBe(
      "http://127.0.0.1:8471/api/images/slide%201/raw",
    );
  });

  it("polls benchmarks until done", async () => {
    const states = [
      { run_id: "r", status: "pending", model_ids: [], part: "test" },
      { run_id: "r", status: "running", model_ids: [], part: "test" },
      {
        run_id: "r", status: "done", model_ids: [], part: "test",
        report: { part: "test", iou_threshold: 0.5, image_count: 0, reports: [], ranking: [] },
      },
    ];
    let call = 0;
    vi.stubGlobal("fetch", vi.fn(async () => ({
      ok: true,
      status: 200,
      text: async () => JSON.stringify(states[Math.min(call++, 2)]),
    })));
    const api = new ApiClient();
    const report = await api.waitForBenchmark("r", { intervalMs: 1 });
    expect(report.part).toBe("test");
    expect(call).toBe(3);
  });
});
