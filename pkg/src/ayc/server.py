"""Loopback-only HTTP/JSON service over the project modules.

Every endpoint delegates 1:1 to a module operation and speaks the same
JSON the CLI emits.  All inference stays on this machine: the server
binds 127.0.0.1 and never makes an outbound call.
"""

from __future__ import annotations

import base64
import binascii
import queue
import socket
import threading
import uuid
from pathlib import Path
from typing import Any, Optional, Union

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import bench
from .annotations import AcceptDetections, AnnotationSet, edit_from_json
from .boxes import Detection
from .errors import (
    ParseError,
    PortInUseError,
    UnknownImageIdError,
    UnknownRunIdError,
    ValidationError,
    WorkbenchError,
)
from .evaluation import ingest_training_log
from .manifest import ModelManifest
from .project import Project

DEFAULT_PORT = 8471
_MEDIA_TYPES = {
    ".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg",
    ".bmp": "image/bmp", ".tif": "image/tiff", ".tiff": "image/tiff",
}


class BenchmarkRunner:
    """Single background worker; extra run requests queue up."""

    def __init__(self, project: Project):
        self._project = project
        self._queue: "queue.Queue[str]" = queue.Queue()
        self._runs: dict[str, dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None

    def _ensure_worker(self) -> None:
        if self._thread is None or not self._thread.is_alive():
            self._thread = threading.Thread(target=self._work, daemon=True)
            self._thread.start()

    def submit(self, model_ids: list[str], part: str, iou_threshold: float = 0.5) -> str:
        for model_id in model_ids:
            self._project.registry.get(model_id)
        run_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._runs[run_id] = {
                "run_id": run_id,
                "status": "pending",
                "model_ids": model_ids,
                "part": part,
                "iou_threshold": iou_threshold,
            }
        self._queue.put(run_id)
        self._ensure_worker()
        return run_id

    def _work(self) -> None:
        while True:
            run_id = self._queue.get()
            with self._lock:
                run = self._runs.get(run_id)
                if run is None:
                    continue
                run["status"] = "running"
            try:
                payload = bench.run_benchmark(
                    self._project,
                    run["model_ids"],
                    part=run["part"],
                    iou_threshold=run["iou_threshold"],
                )
                with self._lock:
                    run["status"] = "done"
                    run["report"] = payload
                self._project.save_benchmark(run_id, {**run})
            except Exception as exc:  # surfaced through the status endpoint
                detail = exc.to_json() if isinstance(exc, WorkbenchError) else {
                    "code": "internal_error", "message": str(exc),
                }
                with self._lock:
                    run["status"] = "failed"
                    run["error"] = detail

    def status(self, run_id: str) -> dict[str, Any]:
        with self._lock:
            run = self._runs.get(run_id)
            if run is not None:
                return dict(run)
        stored = self._project.load_benchmark(run_id)
        if stored is not None:
            return stored
        raise UnknownRunIdError(f"unknown benchmark run '{run_id}'")

    def list_runs(self) -> list[dict[str, Any]]:
        with self._lock:
            live = {run_id: dict(run) for run_id, run in self._runs.items()}
        for path in sorted(self._project.benchmarks_dir.glob("*.json")):
            run_id = path.stem
            if run_id not in live:
                stored = self._project.load_benchmark(run_id)
                if stored:
                    live[run_id] = stored
        return [live[k] for k in sorted(live)]


async def _json_body(request: Request) -> dict[str, Any]:
    try:
        body = await request.json()
    except Exception as exc:
        raise ParseError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ValidationError("request body must be a JSON object")
    return body


def _optional_ratio(body: dict[str, Any], key: str) -> Optional[float]:
    if key not in body or body[key] is None:
        return None
    try:
        value = float(body[key])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"'{key}' must be a number") from exc
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"'{key}' must be within [0, 1]")
    return value


def _set_json(aset: AnnotationSet) -> dict[str, Any]:
    return aset.to_json()


def create_app(project: Project, ui_dir: Optional[Union[str, Path]] = None) -> FastAPI:
    app = FastAPI(title="chromosome detection workbench", docs_url=None, redoc_url=None)
    runner = BenchmarkRunner(project)
    root_str = str(project.root.resolve())

    def _scrub(obj: Any) -> Any:
        """Keep absolute paths under the project root out of responses."""
        if isinstance(obj, str):
            return obj.replace(root_str, ".")
        if isinstance(obj, dict):
            return {k: _scrub(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [_scrub(v) for v in obj]
        return obj

    @app.exception_handler(WorkbenchError)
    async def workbench_error(request: Request, exc: WorkbenchError):
        return JSONResponse(status_code=exc.http_status, content=_scrub(exc.to_json()))

    @app.exception_handler(RequestValidationError)
    async def fastapi_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "validation_error", "message": str(exc)},
        )

    # -- health / project ---------------------------------------------------

    @app.get("/api/health")
    async def health():
        return {"status": "ok"}

    @app.get("/api/project")
    async def project_info():
        return {
            "class_names": list(project.class_names),
            "image_count": len(project.image_records()),
            "active_model": project.registry.active_id,
        }

    # -- models --------------------------------------------------------------

    @app.get("/api/models")
    async def list_models():
        return {"models": project.registry.list_models()}

    @app.post("/api/models")
    async def register_model(request: Request):
        body = await _json_body(request)
        manifest = ModelManifest.from_json(body, base_dir=project.root)
        descriptor = project.register_model(manifest)
        return descriptor.to_json(active=project.registry.active_id == manifest.model_id)

    @app.post("/api/models/{model_id}/activate")
    async def activate_model(model_id: str):
        descriptor = project.activate_model(model_id)
        return descriptor.to_json(active=True)

    # -- inference -------------------------------------------------------

    @app.post("/api/infer")
    async def infer(request: Request):
        body = await _json_body(request)
        if "image_id" in body and body["image_id"] is not None:
            record = project.image_record(str(body["image_id"]))
            source: Any = record.path
        elif "image" in body and body["image"] is not None:
            try:
                source = base64.b64decode(body["image"], validate=True)
            except (binascii.Error, ValueError) as exc:
                raise ValidationError(f"'image' is not valid base64: {exc}") from exc
        else:
            raise ValidationError("provide 'image_id' or base64 'image'")
        model_id = body.get("model_id")
        result = project.registry.run_inference(
            source,
            model_id=str(model_id) if model_id is not None else None,
            confidence=_optional_ratio(body, "confidence"),
            nms_iou=_optional_ratio(body, "nms_iou"),
        )
        class_names = project.registry.get(result.model_id).manifest.class_names
        payload = result.to_json(class_names=class_names)
        if "image_id" in body and body["image_id"] is not None:
            payload["image"]["image_id"] = body["image_id"]
        return payload

    # -- annotations -------------------------------------------------------

    def _existing_or_virtual(image_id: str) -> AnnotationSet:
        aset = project.store.get_set(image_id)
        if aset is not None:
            return aset
        record = project.image_record(image_id)  # 404 for unknown images
        return AnnotationSet(
            image_id=image_id, width=record.width, height=record.height
        )

    @app.get("/api/annotations/{image_id}")
    async def get_annotations(image_id: str):
        return _set_json(_existing_or_virtual(image_id))

    @app.put("/api/annotations/{image_id}")
    async def put_annotation_edit(image_id: str, request: Request):
        body = await _json_body(request)
        edit = edit_from_json(body)
        if not project.store.has_set(image_id):
            record = project.image_record(image_id)
            project.store.ensure_set(image_id, record.width, record.height)
        return _set_json(project.store.commit(image_id, edit))

    @app.post("/api/annotations/{image_id}/accept")
    async def accept_detections(image_id: str, request: Request):
        body = await _json_body(request)
        if "detections" not in body or not isinstance(body["detections"], list):
            raise ValidationError("body must carry a 'detections' array")
        if "expected_revision" not in body:
            raise ValidationError("body must carry 'expected_revision'")
        try:
            dets = tuple(Detection.from_json(d) for d in body["detections"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed detection: {exc}") from exc
        edit = AcceptDetections(
            detections=dets, expected_revision=int(body["expected_revision"])
        )
        if not project.store.has_set(image_id):
            record = project.image_record(image_id)
            project.store.ensure_set(image_id, record.width, record.height)
        return _set_json(project.store.commit(image_id, edit))

    # -- dataset -----------------------------------------------------------

    @app.post("/api/dataset/scan")
    async def dataset_scan(request: Request):
        raw = await request.body()
        body = await _json_body(request) if raw.strip() else {}
        path = body.get("path")
        records = project.scan_images(project.root / path if path else None)
        return {"images": [r.to_json(relative_to=project.root) for r in records]}

    @app.post("/api/dataset/split")
    async def dataset_split(request: Request):
        body = await _json_body(request)
        if "seed" not in body:
            raise ValidationError("split needs a 'seed'")
        try:
            seed = int(body["seed"])
        except (TypeError, ValueError) as exc:
            raise ValidationError("'seed' must be an integer") from exc
        ratios = body.get("ratios", (0.70, 0.15, 0.15))
        if not isinstance(ratios, (list, tuple)) or len(ratios) != 3:
            raise ValidationError("'ratios' must be [train, val, test]")
        split = project.make_split(ratios=tuple(float(r) for r in ratios), seed=seed)
        return split.to_json()

    # -- benchmarks -----------------------------------------------------------

    @app.post("/api/benchmarks")
    async def start_benchmark(request: Request):
        body = await _json_body(request)
        model_ids = body.get("model_ids")
        if not isinstance(model_ids, list) or not model_ids:
            raise ValidationError("'model_ids' must be a non-empty array")
        part = str(body.get("part", "test"))
        if part not in ("train", "val", "test"):
            raise ValidationError("'part' must be train, val, or test")
        run_id = runner.submit([str(m) for m in model_ids], part)
        return {"run_id": run_id, "status": "pending"}

    @app.get("/api/benchmarks")
    async def list_benchmarks():
        return {"runs": runner.list_runs()}

    @app.get("/api/benchmarks/{run_id}")
    async def benchmark_status(run_id: str):
        return runner.status(run_id)

    # -- training logs ---------------------------------------------------

    @app.post("/api/logs/{model_id}")
    async def upload_log(model_id: str, request: Request):
        text = (await request.body()).decode("utf-8", errors="replace")
        series = ingest_training_log(text, model_id)
        project.save_loss_series(series)
        return series.to_json()

    @app.get("/api/logs/{model_id}")
    async def get_log(model_id: str):
        return project.load_loss_series(model_id).to_json()

    @app.get("/api/logs")
    async def list_logs():
        ids = sorted(p.stem for p in (project.root / "logs").glob("*.json"))
        return {"model_ids": ids}

    # -- images ------------------------------------------------------------

    @app.get("/api/images")
    async def list_images():
        return {
            "images": [r.to_json(relative_to=project.root) for r in project.image_records()]
        }

    @app.get("/api/images/{image_id}/raw")
    async def image_raw(image_id: str):
        record = project.image_record(image_id)
        if not record.path.exists():
            raise UnknownImageIdError(f"image file for '{image_id}' is gone")
        media = _MEDIA_TYPES.get(record.path.suffix.lower(), "application/octet-stream")
        return FileResponse(record.path, media_type=media)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def check_port_free(port: int, host: str = "127.0.0.1") -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise PortInUseError(f"port {port} is already in use: {exc}") from exc
    finally:
        probe.close()


def serve(
    project_dir: Union[str, Path],
    port: int = DEFAULT_PORT,
    ui_dir: Optional[Union[str, Path]] = None,
) -> None:
    """Run the service on loopback until interrupted."""
    import uvicorn

    check_port_free(port)
    project = Project(project_dir)
    app = create_app(project, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
