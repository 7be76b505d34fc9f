// Page wiring: connects the pure state modules to the DOM and the API.
// Server state is authoritative throughout; every mutation goes through
// one Edit and the response (or conflict) is what updates the screen.

import { ApiClient, isRevisionConflict } from "./api.js";
import { AnnotationEditor } from "./editorState.js";
import { buildBars, buildLossLines, formatPercent, rankReports } from "./dashboard.js";
import { renderScene } from "./render.js";
import { ReviewState } from "./review.js";
import { ViewTransform } from "./viewTransform.js";
import type { BenchmarkRunDoc, Edit, ImageRecordDoc, ModelDoc } from "./types.js";

const api = new ApiClient();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $("canvas") as unknown as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const view = new ViewTransform();
const review = new ReviewState();

let editor: AnnotationEditor | null = null;
let images: ImageRecordDoc[] = [];
let models: ModelDoc[] = [];
let currentImage: ImageRecordDoc | null = null;
let bitmap: ImageBitmap | null = null;
let pointerActive = false;

// --- rendering ---------------------------------------------------------

function repaint(): void {
  if (!editor || !currentImage) {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    return;
  }
  renderScene(ctx, view, {
    image: bitmap,
    imageWidth: currentImage.width,
    imageHeight: currentImage.height,
    boxes: editor.boxes,
    selectedBoxId: editor.selectedBoxId,
    suggestions: review.visible(),
    preview: editor.previewBox(),
  });
  $("revision-label").textContent = `revision ${editor.revision}`;
  const conflict = editor.conflictInfo();
  $("conflict-banner").hidden = conflict === null;
  if (conflict) {
    $("conflict-text").textContent =
      `Your edit targeted revision ${conflict.expectedRevision}, but the server is at ` +
      `${conflict.currentRevision ?? "a newer"}; reload to continue.`;
  }
}

function resizeCanvas(): void {
  const holder = $("canvas-holder");
  canvas.width = holder.clientWidth;
  canvas.height = holder.clientHeight;
  if (currentImage) {
    view.fitTo(currentImage.width, currentImage.height, canvas.width, canvas.height);
  }
  repaint();
}

// --- edits --------------------------------------------------------------

async function commit(edit: Edit): Promise<void> {
  if (!editor || !currentImage) return;
  try {
    const updated = await api.putEdit(currentImage.image_id, edit);
    editor.applyServer(updated);
  } catch (err) {
    if (isRevisionConflict(err) && editor) {
      const current = (err.details?.current_revision as number | undefined) ?? null;
      editor.markConflict(edit, current);
    } else {
      reportError(err);
    }
  }
  repaint();
}

async function resolveConflict(): Promise<void> {
  if (!editor || !currentImage) return;
  const fresh = await api.getAnnotations(currentImage.image_id);
  const retry = editor.reloadAndReapply(fresh);
  repaint();
  if (retry) await commit(retry);
}

function reportError(err: unknown): void {
  const box = $("status-line");
  box.textContent = err instanceof Error ? err.message : String(err);
  box.classList.add("error");
  setTimeout(() => box.classList.remove("error"), 4000);
}

// --- canvas events -------------------------------------------------------

function canvasPoint(ev: PointerEvent | WheelEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
}

canvas.addEventListener("pointerdown", (ev) => {
  if (!editor) return;
  if (ev.button === 1 || ev.shiftKey) return; // middle/shift reserved for pan
  canvas.setPointerCapture(ev.pointerId);
  pointerActive = true;
  editor.pointerDown(view.screenToImage(canvasPoint(ev)), 6 / view.zoom);
  repaint();
});

canvas.addEventListener("pointermove", (ev) => {
  if (!editor) return;
  if (ev.buttons & 4 || (ev.buttons & 1 && ev.shiftKey)) {
    view.panBy(ev.movementX, ev.movementY);
    repaint();
    return;
  }
  if (pointerActive) {
    editor.pointerMove(view.screenToImage(canvasPoint(ev)));
    repaint();
  }
});

canvas.addEventListener("pointerup", (ev) => {
  if (!editor || !pointerActive) return;
  pointerActive = false;
  const edit = editor.pointerUp(view.screenToImage(canvasPoint(ev)));
  repaint();
  if (edit) void commit(edit);
});

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  view.zoomAt(canvasPoint(ev), ev.deltaY < 0 ? 1.15 : 1 / 1.15);
  repaint();
}, { passive: false });

window.addEventListener("keydown", (ev) => {
  if (!editor) return;
  if (ev.key === "Delete" || ev.key === "Backspace") {
    const edit = editor.deleteSelected();
    if (edit) void commit(edit);
  }
});

// --- image & model panels ------------------------------------------------

async function openImage(record: ImageRecordDoc): Promise<void> {
  currentImage = record;
  review.clear();
  const [set, blob] = await Promise.all([
    api.getAnnotations(record.image_id),
    fetch(api.imageRawUrl(record.image_id)).then((r) => r.blob()),
  ]);
  bitmap = await createImageBitmap(blob);
  editor = new AnnotationEditor(set);
  view.fitTo(record.width, record.height, canvas.width, canvas.height);
  $("image-name").textContent = record.image_id;
  for (const el of document.querySelectorAll("#image-list li")) {
    el.classList.toggle("current", el.textContent === record.image_id);
  }
  repaint();
}

function renderImageList(): void {
  const list = $("image-list");
  list.innerHTML = "";
  for (const record of images) {
    const li = document.createElement("li");
    li.textContent = record.image_id;
    li.onclick = () => void openImage(record);
    list.appendChild(li);
  }
}

function renderModelSwitcher(): void {
  const select = $("model-select") as unknown as HTMLSelectElement;
  select.innerHTML = "";
  for (const model of models) {
    const opt = document.createElement("option");
    opt.value = model.model_id;
    opt.textContent = model.display_name || model.model_id;
    opt.selected = model.active;
    select.appendChild(opt);
  }
  select.onchange = async () => {
    await api.activateModel(select.value);
    models = await api.listModels();
    if (currentImage) await runInference(); // re-infer with the new model
  };
}

// --- detection review ---------------------------------------------------

async function runInference(): Promise<void> {
  if (!currentImage) return;
  const select = $("model-select") as unknown as HTMLSelectElement;
  const result = await api.infer(currentImage.image_id, { modelId: select.value || undefined });
  review.loadResult(result);
  $("review-count").textContent =
    `${result.detections.length} suggestions · ${result.latency_ms.total_ms.toFixed(0)} ms`;
  repaint();
}

$("infer-button").onclick = () => void runInference().catch(reportError);

const slider = $("confidence-slider") as unknown as HTMLInputElement;
slider.oninput = () => {
  review.threshold = Number(slider.value);
  $("slider-value").textContent = Number(slider.value).toFixed(2);
  repaint(); // pure client-side filtering, no re-inference
};

$("accept-all").onclick = async () => {
  if (!editor || !currentImage) return;
  const payload = review.acceptAllPayload();
  if (payload.length === 0) return;
  try {
    const updated = await api.acceptDetections(
      currentImage.image_id, payload, editor.revision,
    );
    editor.applyServer(updated);
    review.markAccepted(payload);
  } catch (err) {
    if (isRevisionConflict(err) && editor) {
      editor.markConflict(
        { op: "remove", box_id: "", expected_revision: editor.revision },
        (err.details?.current_revision as number | undefined) ?? null,
      );
    } else {
      reportError(err);
    }
  }
  repaint();
};

$("conflict-reload").onclick = () => void resolveConflict().catch(reportError);

// --- dashboard ------------------------------------------------------------

const SPLIT_COLORS: Record<string, string> = { train: "#2573c4", val: "#e0a716" };
const MODEL_DASH = ["", "6,4", "2,3", "8,2,2,2"];

function svgEl(name: string): SVGElement {
  return document.createElementNS("http://www.w3.org/2000/svg", name);
}

function renderDashboard(run: BenchmarkRunDoc | null, lossSeries: Awaited<ReturnType<typeof api.getLog>>[]): void {
  const empty = $("dashboard-empty");
  const charts = $("dashboard-charts");
  if (!run || !run.report) {
    empty.hidden = false;
    charts.hidden = true;
    return;
  }
  empty.hidden = true;
  charts.hidden = false;

  const report = run.report;
  const mapSvg = $("map-chart");
  mapSvg.innerHTML = "";
  const size = { width: 460, height: 240 };
  for (const bar of buildBars(report.reports, size)) {
    const rect = svgEl("rect");
    rect.setAttribute("x", String(bar.x));
    rect.setAttribute("y", String(bar.y));
    rect.setAttribute("width", String(bar.width));
    rect.setAttribute("height", String(bar.height));
    rect.setAttribute("class", "map-bar");
    mapSvg.appendChild(rect);
    const label = svgEl("text");
    label.setAttribute("x", String(bar.x + bar.width / 2));
    label.setAttribute("y", String(size.height - 6));
    label.setAttribute("text-anchor", "middle");
    label.textContent = bar.modelId;
    mapSvg.appendChild(label);
    const value = svgEl("text");
    value.setAttribute("x", String(bar.x + bar.width / 2));
    value.setAttribute("y", String(Math.max(bar.y - 5, 12)));
    value.setAttribute("text-anchor", "middle");
    value.textContent = formatPercent(bar.value);
    mapSvg.appendChild(value);
  }

  const lossSvg = $("loss-chart");
  lossSvg.innerHTML = "";
  const modelIndex = new Map<string, number>();
  for (const line of buildLossLines(lossSeries, size)) {
    if (!modelIndex.has(line.modelId)) modelIndex.set(line.modelId, modelIndex.size);
    const path = svgEl("path");
    path.setAttribute("d", line.path);
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", SPLIT_COLORS[line.split]);
    path.setAttribute("stroke-dasharray", MODEL_DASH[modelIndex.get(line.modelId)! % MODEL_DASH.length]);
    path.setAttribute("stroke-width", "1.6");
    lossSvg.appendChild(path);
  }

  const table = $("ranking-body");
  table.innerHTML = "";
  const reportsById = new Map(report.reports.map((r) => [r.model_id, r]));
  for (const entry of report.ranking) {
    const tr = document.createElement("tr");
    const latency = reportsById.get(entry.model_id)?.latency;
    tr.innerHTML =
      `<td>${entry.rank}</td><td>${entry.model_id}</td>` +
      `<td>${formatPercent(entry.map_at_50)}</td>` +
      `<td>${(entry.delta_vs_best * 100).toFixed(2)}pp</td>` +
      `<td>${latency ? latency.p50_ms.toFixed(1) + " ms" : "–"}</td>`;
    table.appendChild(tr);
  }
}

async function refreshDashboard(): Promise<void> {
  const runs = await api.listBenchmarks();
  const done = runs.filter((r) => r.status === "done" && r.report);
  const latest = done.length ? done[done.length - 1] : null;
  const logIds = await api.listLogs();
  const series = await Promise.all(logIds.map((id) => api.getLog(id)));
  renderDashboard(latest, series);
}

$("bench-button").onclick = async () => {
  const spinner = $("bench-spinner");
  spinner.hidden = false;
  try {
    const ids = models.map((m) => m.model_id);
    const { run_id } = await api.startBenchmark(ids, "test");
    await api.waitForBenchmark(run_id, { intervalMs: 500 });
    await refreshDashboard();
  } catch (err) {
    reportError(err);
  } finally {
    spinner.hidden = true;
  }
};

// --- tabs & startup -------------------------------------------------------

for (const button of document.querySelectorAll<HTMLButtonElement>("[data-tab]")) {
  button.onclick = () => {
    for (const panel of document.querySelectorAll<HTMLElement>(".tab-panel")) {
      panel.hidden = panel.id !== button.dataset.tab;
    }
    for (const other of document.querySelectorAll("[data-tab]")) {
      other.classList.toggle("active", other === button);
    }
    if (button.dataset.tab === "dashboard-panel") {
      void refreshDashboard().catch(reportError);
    } else {
      resizeCanvas();
    }
  };
}

window.addEventListener("resize", resizeCanvas);

async function start(): Promise<void> {
  [images, models] = await Promise.all([api.listImages(), api.listModels()]);
  renderImageList();
  renderModelSwitcher();
  resizeCanvas();
  if (images.length) await openImage(images[0]);
}

void start().catch(reportError);
