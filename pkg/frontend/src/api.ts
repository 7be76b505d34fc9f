// Typed client for the local workbench service. Every mutation carries
// the revision it was computed against; the server decides what sticks.

import type {
  AnnotationSetDoc,
  ApiErrorDoc,
  BenchmarkReportDoc,
  BenchmarkRunDoc,
  DetectionDoc,
  Edit,
  ImageRecordDoc,
  InferenceResultDoc,
  LossSeriesDoc,
  ModelDoc,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly details?: Record<string, unknown>;

  constructor(status: number, doc: ApiErrorDoc) {
    super(doc.message);
    this.code = doc.code;
    this.status = status;
    this.details = doc.details;
  }
}

export function isRevisionConflict(err: unknown): err is ApiError {
  return err instanceof ApiError && err.code === "revision_conflict";
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.baseUrl + path, init);
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new ApiError(response.status, payload as ApiErrorDoc);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/api/health");
  }

  projectInfo(): Promise<{ class_names: string[]; image_count: number; active_model: string | null }> {
    return this.request("GET", "/api/project");
  }

  async listModels(): Promise<ModelDoc[]> {
    const body = await this.request<{ models: ModelDoc[] }>("GET", "/api/models");
    return body.models;
  }

  activateModel(modelId: string): Promise<ModelDoc> {
    return this.request("POST", `/api/models/${encodeURIComponent(modelId)}/activate`);
  }

  infer(
    imageId: string,
    opts: { modelId?: string; confidence?: number; nmsIou?: number } = {},
  ): Promise<InferenceResultDoc> {
    return this.request("POST", "/api/infer", {
      image_id: imageId,
      model_id: opts.modelId,
      confidence: opts.confidence,
      nms_iou: opts.nmsIou,
    });
  }

  getAnnotations(imageId: string): Promise<AnnotationSetDoc> {
    return this.request("GET", `/api/annotations/${encodeURIComponent(imageId)}`);
  }

  putEdit(imageId: string, edit: Edit): Promise<AnnotationSetDoc> {
    return this.request("PUT", `/api/annotations/${encodeURIComponent(imageId)}`, edit);
  }

  acceptDetections(
    imageId: string,
    detections: DetectionDoc[],
    expectedRevision: number,
  ): Promise<AnnotationSetDoc> {
    return this.request("POST", `/api/annotations/${encodeURIComponent(imageId)}/accept`, {
      detections,
      expected_revision: expectedRevision,
    });
  }

  async listImages(): Promise<ImageRecordDoc[]> {
    const body = await this.request<{ images: ImageRecordDoc[] }>("GET", "/api/images");
    return body.images;
  }

  imageRawUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${encodeURIComponent(imageId)}/raw`;
  }

  startBenchmark(modelIds: string[], part: string): Promise<{ run_id: string; status: string }> {
    return this.request("POST", "/api/benchmarks", { model_ids: modelIds, part });
  }

  benchmarkStatus(runId: string): Promise<BenchmarkRunDoc> {
    return this.request("GET", `/api/benchmarks/${encodeURIComponent(runId)}`);
  }

  async listBenchmarks(): Promise<BenchmarkRunDoc[]> {
    const body = await this.request<{ runs: BenchmarkRunDoc[] }>("GET", "/api/benchmarks");
    return body.runs;
  }

  async listLogs(): Promise<string[]> {
    const body = await this.request<{ model_ids: string[] }>("GET", "/api/logs");
    return body.model_ids;
  }

  getLog(modelId: string): Promise<LossSeriesDoc> {
    return this.request("GET", `/api/logs/${encodeURIComponent(modelId)}`);
  }

  async waitForBenchmark(
    runId: string,
    opts: { intervalMs?: number; timeoutMs?: number } = {},
  ): Promise<BenchmarkReportDoc> {
    const interval = opts.intervalMs ?? 500;
    const deadline = Date.now() + (opts.timeoutMs ?? 600_000);
    for (;;) {
      const run = await this.benchmarkStatus(runId);
      if (run.status === "done" && run.report) return run.report;
      if (run.status === "failed") {
        throw new ApiError(500, run.error ?? { code: "internal_error", message: "run failed" });
      }
      if (Date.now() > deadline) {
        throw new ApiError(500, { code: "timeout", message: `run ${runId} never finished` });
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
