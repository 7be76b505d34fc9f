"""HTTP facade: endpoint behavior, error contract, benchmark polling."""

import base64
import io
import json
import time

import pytest
from fastapi.testclient import TestClient

from ayc.server import check_port_free, create_app
from ayc.errors import PortInUseError
from ayc.project import Project

from conftest import build_project, make_image

ERROR_CODES = {
    "file_not_found", "invalid_model_file", "signature_mismatch",
    "duplicate_model_id", "unknown_model_id", "unsupported_image_format",
    "shape_mismatch", "inference_failure", "unknown_class_id", "empty_input",
    "malformed_log", "non_monotone_epochs", "revision_conflict",
    "unknown_box_id", "out_of_bounds", "unknown_class", "dims_missing",
    "parse_error", "inconsistent_dims", "dir_unreadable", "duplicate_image_id",
    "bad_ratios", "too_few_images", "missing_annotations", "port_in_use",
    "project_dir_unwritable", "unknown_run_id", "validation_error",
    "unknown_image_id", "internal_error",
}


@pytest.fixture()
def client(tmp_path) -> TestClient:
    project = build_project(tmp_path / "p")
    return TestClient(create_app(project))


def assert_api_error(response, status: int, code: str):
    assert response.status_code == status, response.text
    body = response.json()
    assert body["code"] == code
    assert body["code"] in ERROR_CODES
    assert isinstance(body["message"], str) and body["message"]


class TestModels:
    def test_list(self, client):
        body = client.get("/api/models").json()
        ids = {m["model_id"]: m for m in body["models"]}
        assert set(ids) == {"fixture-grid", "fixture-triplet"}
        assert ids["fixture-grid"]["active"] is True
        for m in body["models"]:
            assert "file" not in m  # no paths in API payloads

    def test_activate(self, client):
        r = client.post("/api/models/fixture-triplet/activate")
        assert r.status_code == 200
        assert r.json()["active"] is True
        ids = {m["model_id"]: m for m in client.get("/api/models").json()["models"]}
        assert ids["fixture-triplet"]["active"] is True
        assert ids["fixture-grid"]["active"] is False

    def test_activate_unknown(self, client):
        assert_api_error(
            client.post("/api/models/ghost/activate"), 404, "unknown_model_id"
        )

    def test_register_duplicate(self, client, assets_dir):
        manifest = json.loads(
            (assets_dir / "fixture-grid.onnx.manifest.json").read_text()
        )
        manifest["file"] = str(assets_dir / "fixture-grid.onnx")
        assert_api_error(
            client.post("/api/models", json=manifest), 422, "duplicate_model_id"
        )

    def test_register_new(self, client, assets_dir):
        manifest = json.loads(
            (assets_dir / "fixture-grid.onnx.manifest.json").read_text()
        )
        manifest["model_id"] = "fixture-grid-2"
        manifest["file"] = str(assets_dir / "fixture-grid.onnx")
        r = client.post("/api/models", json=manifest)
        assert r.status_code == 200
        assert r.json()["model_id"] == "fixture-grid-2"

    def test_register_missing_file(self, client):
        manifest = {
            "model_id": "nope", "file": "models/none.onnx",
            "input": {"width": 64, "height": 64},
            "decode": {"variant": "combined_grid"},
        }
        assert_api_error(client.post("/api/models", json=manifest), 404, "file_not_found")


class TestInfer:
    def test_by_image_id(self, client):
        r = client.post("/api/infer", json={"image_id": "img000"})
        assert r.status_code == 200
        body = r.json()
        assert body["model_id"] == "fixture-grid"
        assert body["image"]["image_id"] == "img000"
        assert len(body["detections"]) == 1
        det = body["detections"][0]
        assert det["class_name"] == "chromosome"
        assert set(body["latency_ms"]) == {
            "preprocess_ms", "forward_ms", "postprocess_ms", "total_ms",
        }

    def test_inline_base64(self, client):
        buf = io.BytesIO()
        make_image(64, 64, seed=5).save(buf, format="PNG")
        b64 = base64.b64encode(buf.getvalue()).decode()
        r = client.post("/api/infer", json={"image": b64, "model_id": "fixture-triplet"})
        assert r.status_code == 200
        assert r.json()["model_id"] == "fixture-triplet"
        assert len(r.json()["detections"]) == 2

    def test_overrides(self, client):
        r = client.post("/api/infer", json={"image_id": "img000", "confidence": 1.0})
        assert r.json()["detections"] == []

    def test_unknown_image(self, client):
        assert_api_error(
            client.post("/api/infer", json={"image_id": "ghost"}), 404, "unknown_image_id"
        )

    def test_bad_base64(self, client):
        assert_api_error(
            client.post("/api/infer", json={"image": "@@@"}), 400, "validation_error"
        )

    def test_neither_source(self, client):
        assert_api_error(client.post("/api/infer", json={}), 400, "validation_error")

    def test_garbage_image_bytes(self, client):
        b64 = base64.b64encode(b"not an image").decode()
        assert_api_error(
            client.post("/api/infer", json={"image": b64}), 400, "unsupported_image_format"
        )


class TestAnnotations:
    def test_get_existing(self, client):
        body = client.get("/api/annotations/img000").json()
        assert body["revision"] == 0
        assert len(body["boxes"]) == 3

    def test_get_unknown_image(self, client):
        assert_api_error(client.get("/api/annotations/ghost"), 404, "unknown_image_id")

    def test_get_is_pure(self, tmp_path):
        project = build_project(tmp_path / "p2", with_models=False)
        client = TestClient(create_app(project))
        # drop the stored set for one image to exercise the virtual view
        audit_before = (project.root / "audit.log").read_text()
        for _ in range(3):
            body = client.get("/api/annotations/img000").json()
            assert body["revision"] == 0
        assert (project.root / "audit.log").read_text() == audit_before

    def test_edit_cycle(self, client):
        base = client.get("/api/annotations/img000").json()
        edit = {
            "op": "add",
            "bbox": {"x_min": 1, "y_min": 1, "x_max": 20, "y_max": 20},
            "class_id": 0,
            "expected_revision": base["revision"],
        }
        r = client.put("/api/annotations/img000", json=edit)
        assert r.status_code == 200
        after = r.json()
        assert after["revision"] == base["revision"] + 1
        assert len(after["boxes"]) == len(base["boxes"]) + 1

    def test_stale_revision_conflict(self, client):
        edit = {
            "op": "add",
            "bbox": {"x_min": 1, "y_min": 1, "x_max": 5, "y_max": 5},
            "class_id": 0,
            "expected_revision": 0,
        }
        assert client.put("/api/annotations/img001", json=edit).status_code == 200
        assert_api_error(
            client.put("/api/annotations/img001", json=edit), 409, "revision_conflict"
        )

    def test_remove_unknown_box(self, client):
        edit = {"op": "remove", "box_id": "nope", "expected_revision": 0}
        assert_api_error(
            client.put("/api/annotations/img002", json=edit), 404, "unknown_box_id"
        )

    def test_out_of_bounds(self, client):
        edit = {
            "op": "add",
            "bbox": {"x_min": 0, "y_min": 0, "x_max": 5000, "y_max": 5},
            "class_id": 0,
            "expected_revision": 0,
        }
        assert_api_error(
            client.put("/api/annotations/img003", json=edit), 400, "out_of_bounds"
        )

    def test_accept_detections(self, client):
        infer = client.post("/api/infer", json={"image_id": "img004"}).json()
        base = client.get("/api/annotations/img004").json()
        r = client.post(
            "/api/annotations/img004/accept",
            json={
                "detections": infer["detections"],
                "expected_revision": base["revision"],
            },
        )
        assert r.status_code == 200
        body = r.json()
        accepted = [b for b in body["boxes"] if b["provenance"] == "model_accepted"]
        assert len(accepted) == len(infer["detections"])


class TestDataset:
    def test_scan(self, client):
        r = client.post("/api/dataset/scan")
        assert r.status_code == 200
        assert len(r.json()["images"]) == 6

    def test_split(self, client):
        r = client.post("/api/dataset/split", json={"seed": 3})
        assert r.status_code == 200
        body = r.json()
        assert body["seed"] == 3
        assert len(body["train"]) + len(body["val"]) + len(body["test"]) == 6

    def test_split_needs_seed(self, client):
        assert_api_error(
            client.post("/api/dataset/split", json={}), 400, "validation_error"
        )

    def test_split_bad_ratios(self, client):
        assert_api_error(
            client.post("/api/dataset/split", json={"seed": 1, "ratios": [0.9, 0.3, 0.3]}),
            400, "bad_ratios",
        )


class TestBenchmarks:
    def wait_done(self, client, run_id, timeout=30.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            body = client.get(f"/api/benchmarks/{run_id}").json()
            if body["status"] in ("done", "failed"):
                return body
            time.sleep(0.05)
        raise AssertionError("benchmark never finished")

    def test_async_run(self, client):
        r = client.post(
            "/api/benchmarks", json={"model_ids": ["fixture-grid"], "part": "test"}
        )
        assert r.status_code == 200
        run_id = r.json()["run_id"]
        final = self.wait_done(client, run_id)
        assert final["status"] == "done", final
        assert final["report"]["ranking"][0]["model_id"] == "fixture-grid"

    def test_unknown_run(self, client):
        assert_api_error(client.get("/api/benchmarks/na"), 404, "unknown_run_id")

    def test_unknown_model_rejected_at_submit(self, client):
        assert_api_error(
            client.post("/api/benchmarks", json={"model_ids": ["ghost"], "part": "test"}),
            404, "unknown_model_id",
        )

    def test_bad_part(self, client):
        assert_api_error(
            client.post("/api/benchmarks", json={"model_ids": ["fixture-grid"], "part": "x"}),
            400, "validation_error",
        )


class TestLogs:
    def test_upload_and_fetch(self, client):
        csv = "epoch,split,loss\n1,train,0.9\n2,train,0.5\n"
        r = client.post("/api/logs/fixture-grid", content=csv)
        assert r.status_code == 200
        body = client.get("/api/logs/fixture-grid").json()
        assert len(body["points"]) == 2

    def test_malformed(self, client):
        assert_api_error(
            client.post("/api/logs/m", content="epoch,what\n1,2\n"), 400, "malformed_log"
        )

    def test_non_monotone(self, client):
        csv = "epoch,split,loss\n2,train,0.9\n1,train,0.5\n"
        assert_api_error(
            client.post("/api/logs/m", content=csv), 400, "non_monotone_epochs"
        )

    def test_missing_log(self, client):
        assert_api_error(client.get("/api/logs/ghost"), 404, "unknown_model_id")


class TestImages:
    def test_list(self, client):
        body = client.get("/api/images").json()
        assert len(body["images"]) == 6
        for record in body["images"]:
            assert not record["path"].startswith("/")  # relative to project

    def test_raw_bytes(self, client):
        r = client.get("/api/images/img000/raw")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown(self, client):
        assert_api_error(client.get("/api/images/ghost/raw"), 404, "unknown_image_id")


class TestContract:
    def test_no_absolute_paths_in_responses(self, tmp_path):
        project = build_project(tmp_path / "proj-secret")
        client = TestClient(create_app(project))
        root = str(project.root.resolve())
        responses = [
            client.get("/api/models"),
            client.get("/api/images"),
            client.get("/api/annotations/img000"),
            client.post("/api/infer", json={"image_id": "img000"}),
            client.post("/api/dataset/scan"),
            client.post("/api/models", json={
                "model_id": "missing", "file": "models/gone.onnx",
                "input": {"width": 64, "height": 64},
                "decode": {"variant": "combined_grid"},
            }),
        ]
        for r in responses:
            assert root not in r.text

    def test_repeated_gets_do_not_mutate(self, tmp_path):
        project = build_project(tmp_path / "p3")
        client = TestClient(create_app(project))
        snapshots = []
        for _ in range(2):
            snapshots.append((
                client.get("/api/models").text,
                client.get("/api/images").text,
                client.get("/api/annotations/img000").text,
            ))
        assert snapshots[0] == snapshots[1]

    def test_errors_conform_to_schema(self, client):
        failures = [
            client.get("/api/images/ghost/raw"),
            client.post("/api/models/ghost/activate"),
            client.post("/api/infer", json={}),
            client.get("/api/benchmarks/none"),
        ]
        for r in failures:
            body = r.json()
            assert set(body) <= {"code", "message", "details"}
            assert body["code"] in ERROR_CODES


def test_port_check(tmp_path):
    import socket
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.bind(("127.0.0.1", 0))
    sock.listen(1)
    port = sock.getsockname()[1]
    try:
        with pytest.raises(PortInUseError):
            check_port_free(port)
    finally:
        sock.close()
    check_port_free(port)  # free after close
