// Wire types: these mirror the service JSON exactly. The server is the
// source of truth for all state; the client never computes metrics or
// keeps locally-invented annotations.

export interface BBoxDoc {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface DetectionDoc {
  bbox: BBoxDoc;
  class_id: number;
  confidence: number;
  class_name?: string;
}

export interface InferenceResultDoc {
  model_id: string;
  image: { width: number; height: number; image_id?: string };
  detections: DetectionDoc[];
  latency_ms: {
    preprocess_ms: number;
    forward_ms: number;
    postprocess_ms: number;
    total_ms: number;
  };
}

export type Provenance = "human" | "model_suggested" | "model_accepted";

export interface AnnBoxDoc {
  box_id: string;
  bbox: BBoxDoc;
  class_id: number;
  provenance: Provenance;
}

export interface AnnotationSetDoc {
  image_id: string;
  width: number | null;
  height: number | null;
  revision: number;
  boxes: AnnBoxDoc[];
}

export interface AddEdit {
  op: "add";
  bbox: BBoxDoc;
  class_id: number;
  expected_revision: number;
}

export interface RemoveEdit {
  op: "remove";
  box_id: string;
  expected_revision: number;
}

export interface AdjustEdit {
  op: "adjust";
  box_id: string;
  new_bbox: BBoxDoc;
  expected_revision: number;
}

export type Edit = AddEdit | RemoveEdit | AdjustEdit;

export interface ModelDoc {
  model_id: string;
  display_name: string;
  active: boolean;
  class_names: string[];
  defaults: { confidence: number; nms_iou: number };
  input: { width: number; height: number };
}

export interface ImageRecordDoc {
  image_id: string;
  path: string;
  width: number;
  height: number;
}

export interface EvalReportDoc {
  model_id: string;
  map_at_50: number;
  per_class_ap: Record<string, number>;
  tp: number;
  fp: number;
  fn: number;
  pr_points: [number, number][];
  latency: { mean_ms: number; p50_ms: number; p95_ms: number } | null;
}

export interface RankingEntryDoc {
  rank: number;
  model_id: string;
  map_at_50: number;
  delta_vs_best: number;
}

export interface BenchmarkReportDoc {
  part: string;
  iou_threshold: number;
  image_count: number;
  reports: EvalReportDoc[];
  ranking: RankingEntryDoc[];
}

export interface BenchmarkRunDoc {
  run_id: string;
  status: "pending" | "running" | "done" | "failed";
  model_ids: string[];
  part: string;
  report?: BenchmarkReportDoc;
  error?: { code: string; message: string };
}

export interface LossPointDoc {
  epoch: number;
  split: "train" | "val";
  loss: number;
}

export interface LossSeriesDoc {
  model_id: string;
  points: LossPointDoc[];
}

export interface ApiErrorDoc {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}
