// Integration against the real service: spawns the Python backend on a
// scratch project and drives the edit loop over actual HTTP.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { ApiClient, isRevisionConflict } from "../src/api.js";
import { AnnotationEditor } from "../src/editorState.js";
import type { Edit } from "../src/types.js";

const REPO_ROOT = resolve(__dirname, "..", "..");
const PORT = 8497; // scratch port, not the default
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | null = null;

async function waitForHealth(api: ApiClient, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      await api.health();
      return;
    } catch {
      if (Date.now() > deadline) throw new Error("service never became healthy");
      await new Promise((r) => setTimeout(r, 150));
    }
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "ayc-ui-"));
  const projectDir = join(workdir, "proj");
  const seeded = spawnSync(
    "python3",
    [join(REPO_ROOT, "scripts", "demo_project.py"), projectDir],
    { cwd: REPO_ROOT, encoding: "utf-8" },
  );
  if (seeded.status !== 0) {
    throw new Error(`demo project failed: ${seeded.stderr}`);
  }
  server = spawn(
    "python3",
    ["-m", "ayc.cli", "serve", "--project", projectDir, "--port", String(PORT)],
    { cwd: REPO_ROOT, stdio: "ignore" },
  );
  await waitForHealth(new ApiClient(BASE));
}, 120_000);

afterAll(() => {
  server?.kill("SIGTERM");
  rmSync(workdir, { recursive: true, force: true });
});

describe("edit loop against the live service", () => {
  it("drawing a box issues exactly one PUT with the correct expected_revision", async () => {
    const api = new ApiClient(BASE);
    const putSpy = vi.spyOn(api, "putEdit");

    const set = await api.getAnnotations("slide000");
    const editor = new AnnotationEditor(set);

    editor.pointerDown({ x: 30, y: 30 }, 4);
    editor.pointerMove({ x: 90, y: 75 });
    const edit = editor.pointerUp({ x: 100, y: 80 });
    expect(edit).not.toBeNull();
    expect(edit!.expected_revision).toBe(set.revision);

    const updated = await api.putEdit("slide000", edit!);
    editor.applyServer(updated);

    expect(putSpy).toHaveBeenCalledTimes(1);
    expect(updated.revision).toBe(set.revision + 1);
    expect(updated.boxes.length).toBe(set.boxes.length + 1);
    const added = updated.boxes[updated.boxes.length - 1];
    expect(added.provenance).toBe("human");
    expect(added.bbox).toEqual({ x_min: 30, y_min: 30, x_max: 100, y_max: 80 });
  });

  it("a forced RevisionConflict surfaces the conflict state", async () => {
    const api = new ApiClient(BASE);
    const set = await api.getAnnotations("slide001");
    const editor = new AnnotationEditor(set);

    // someone else edits the same image behind our back
    const external: Edit = {
      op: "add",
      bbox: { x_min: 5, y_min: 5, x_max: 25, y_max: 25 },
      class_id: 0,
      expected_revision: set.revision,
    };
    await api.putEdit("slide001", external);

    // the editor still believes in the old revision: its edit must 409
    editor.pointerDown({ x: 200, y: 120 }, 4);
    const stale = editor.pointerUp({ x: 260, y: 170 });
    expect(stale!.expected_revision).toBe(set.revision);

    let conflictSeen = false;
    try {
      await api.putEdit("slide001", stale!);
    } catch (err) {
      expect(isRevisionConflict(err)).toBe(true);
      conflictSeen = true;
      const current = (err as { details?: { current_revision?: number } }).details
        ?.current_revision;
      editor.markConflict(stale!, current ?? null);
    }
    expect(conflictSeen).toBe(true);
    expect(editor.phase).toBe("conflict");
    expect(editor.conflictInfo()!.currentRevision).toBe(set.revision + 1);

    // reload-and-reapply path: the retried edit lands on the new revision
    const fresh = await api.getAnnotations("slide001");
    const retry = editor.reloadAndReapply(fresh);
    expect(retry).not.toBeNull();
    const final = await api.putEdit("slide001", retry!);
    editor.applyServer(final);
    expect(editor.phase).toBe("idle");
    expect(final.revision).toBe(set.revision + 2);
  }, 30_000);

  it("inference overlays and accept round-trip through the API", async () => {
    const api = new ApiClient(BASE);
    const result = await api.infer("slide002");
    expect(result.detections.length).toBeGreaterThan(0);

    const set = await api.getAnnotations("slide002");
    const after = await api.acceptDetections("slide002", result.detections, set.revision);
    const accepted = after.boxes.filter((b) => b.provenance === "model_accepted");
    expect(accepted.length).toBe(result.detections.length);
    expect(after.revision).toBe(set.revision + 1);
  }, 30_000);

  it("dashboard data flows: benchmark run + loss series", async () => {
    const api = new ApiClient(BASE);
    const { run_id } = await api.startBenchmark(["fixture-grid", "fixture-triplet"], "test");
    const report = await api.waitForBenchmark(run_id, { intervalMs: 200, timeoutMs: 60_000 });
    expect(report.ranking.length).toBe(2);
    expect(report.ranking[0].rank).toBe(1);

    const logs = await api.listLogs();
    expect(logs).toContain("fixture-grid");
    const series = await api.getLog("fixture-grid");
    expect(series.points.length).toBeGreaterThan(0);
  }, 90_000);
});
