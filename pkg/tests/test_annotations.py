"""Annotation sets: edits, optimistic revisions, store persistence,
audit replay."""

import json

import pytest

from ayc.annotations import (
    AcceptDetections,
    AddBox,
    AdjustBox,
    AnnotationSet,
    AnnotationStore,
    RemoveBox,
    apply_edit,
    edit_from_json,
    edit_to_json,
)
from ayc.boxes import BBox, Detection
from ayc.errors import (
    OutOfBoundsError,
    ParseError,
    RevisionConflictError,
    UnknownBoxIdError,
    UnknownImageIdError,
)


def empty_set(image_id="img1", width=640, height=480) -> AnnotationSet:
    return AnnotationSet(image_id=image_id, width=width, height=height)


class TestApplyEdit:
    def test_add_to_empty(self):
        aset = empty_set()
        new, realized = apply_edit(aset, AddBox(BBox(10, 10, 50, 50), 0, expected_revision=0))
        assert new.revision == 1
        assert len(new.boxes) == 1
        assert new.boxes[0].provenance == "human"
        assert realized.box_id == new.boxes[0].box_id

    def test_remove_unknown(self):
        with pytest.raises(UnknownBoxIdError):
            apply_edit(empty_set(), RemoveBox("nope", expected_revision=0))

    def test_stale_revision_conflicts(self):
        aset, _ = apply_edit(empty_set(), AddBox(BBox(0, 0, 10, 10), 0, expected_revision=0))
        with pytest.raises(RevisionConflictError) as exc:
            apply_edit(aset, AddBox(BBox(2, 2, 8, 8), 0, expected_revision=0))
        assert exc.value.details["current_revision"] == 1

    def test_adjust(self):
        aset, realized = apply_edit(empty_set(), AddBox(BBox(0, 0, 10, 10), 0, expected_revision=0))
        new, _ = apply_edit(
            aset, AdjustBox(realized.box_id, BBox(5, 5, 20, 20), expected_revision=1)
        )
        assert new.boxes[0].bbox == BBox(5, 5, 20, 20)
        assert new.revision == 2

    def test_adjust_unknown(self):
        with pytest.raises(UnknownBoxIdError):
            apply_edit(empty_set(), AdjustBox("ghost", BBox(0, 0, 1, 1), expected_revision=0))

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            apply_edit(empty_set(), AddBox(BBox(0, 0, 9999, 10), 0, expected_revision=0))

    def test_bounds_skipped_without_dims(self):
        aset = AnnotationSet(image_id="nodims")
        new, _ = apply_edit(aset, AddBox(BBox(0, 0, 9999, 9999), 0, expected_revision=0))
        assert len(new.boxes) == 1

    def test_accept_detections(self):
        dets = (
            Detection(BBox(1, 1, 5, 5), 0, 0.9),
            Detection(BBox(10, 10, 20, 20), 0, 0.7),
        )
        new, realized = apply_edit(empty_set(), AcceptDetections(dets, expected_revision=0))
        assert new.revision == 1
        assert [b.provenance for b in new.boxes] == ["model_accepted"] * 2
        assert len(realized.box_ids) == 2

    def test_revision_strictly_increments(self):
        aset = empty_set()
        for k in range(5):
            aset, _ = apply_edit(
                aset, AddBox(BBox(k, k, k + 1, k + 1), 0, expected_revision=k)
            )
        assert aset.revision == 5
        assert len(aset.boxes) == 5


class TestEditWireFormat:
    def test_round_trip_each_kind(self):
        edits = [
            AddBox(BBox(1, 2, 3, 4), 1, expected_revision=0, box_id="x1"),
            RemoveBox("x1", expected_revision=3),
            AdjustBox("x1", BBox(0, 0, 9, 9), expected_revision=2),
            AcceptDetections(
                (Detection(BBox(0, 0, 4, 4), 0, 0.5),), expected_revision=1,
                box_ids=("a",),
            ),
        ]
        for edit in edits:
            assert edit_from_json(edit_to_json(edit)) == edit

    def test_missing_op(self):
        with pytest.raises(ParseError):
            edit_from_json({"expected_revision": 0})

    def test_unknown_op(self):
        with pytest.raises(ParseError):
            edit_from_json({"op": "explode", "expected_revision": 0})

    def test_missing_revision(self):
        with pytest.raises(ParseError):
            edit_from_json({"op": "remove", "box_id": "b"})


class TestStore:
    def test_commit_and_reload(self, tmp_path):
        store = AnnotationStore(tmp_path)
        store.ensure_set("img1", 640, 480)
        store.commit("img1", AddBox(BBox(10, 10, 50, 50), 0, expected_revision=0))
        store.commit("img1", AddBox(BBox(100, 100, 150, 150), 0, expected_revision=1))

        reloaded = AnnotationStore(tmp_path)
        aset = reloaded.get_set("img1")
        assert aset.revision == 2
        assert len(aset.boxes) == 2
        assert aset.width == 640

    def test_commit_unknown_image(self, tmp_path):
        store = AnnotationStore(tmp_path)
        with pytest.raises(UnknownImageIdError):
            store.commit("ghost", AddBox(BBox(0, 0, 1, 1), 0, expected_revision=0))

    def test_concurrent_stale_edit_rejected(self, tmp_path):
        store = AnnotationStore(tmp_path)
        store.ensure_set("img1", 640, 480)
        first = AddBox(BBox(0, 0, 10, 10), 0, expected_revision=0)
        second = AddBox(BBox(20, 20, 30, 30), 0, expected_revision=0)
        store.commit("img1", first)
        with pytest.raises(RevisionConflictError):
            store.commit("img1", second)

    def test_audit_replay_reconstructs(self, tmp_path):
        store = AnnotationStore(tmp_path)
        store.ensure_set("img1", 640, 480)
        store.commit("img1", AddBox(BBox(10, 10, 50, 50), 0, expected_revision=0))
        aset = store.get_set("img1")
        store.commit("img1", AdjustBox(aset.boxes[0].box_id, BBox(12, 12, 48, 48), 1))
        store.commit("img1", AcceptDetections(
            (Detection(BBox(100, 100, 200, 200), 0, 0.8),), expected_revision=2
        ))
        store.ensure_set("img2", 100, 100)
        store.commit("img2", AddBox(BBox(1, 1, 9, 9), 0, expected_revision=0))
        store.commit("img2", RemoveBox(store.get_set("img2").boxes[0].box_id, 1))

        replayed = store.replay_audit()
        assert replayed == {"img1": store.get_set("img1"), "img2": store.get_set("img2")}

    def test_audit_log_line_count_tracks_revisions(self, tmp_path):
        store = AnnotationStore(tmp_path)
        store.ensure_set("img1", 640, 480)
        for k in range(3):
            store.commit("img1", AddBox(BBox(k, k, k + 1, k + 1), 0, expected_revision=k))
        lines = [
            json.loads(l)
            for l in (tmp_path / "audit.log").read_text().splitlines() if l
        ]
        edits = [l for l in lines if l["type"] == "edit"]
        assert len(edits) == store.get_set("img1").revision

    def test_ensure_set_idempotent(self, tmp_path):
        store = AnnotationStore(tmp_path)
        a = store.ensure_set("img1", 10, 10)
        store.commit("img1", AddBox(BBox(0, 0, 5, 5), 0, expected_revision=0))
        b = store.ensure_set("img1", 10, 10)
        assert b.revision == 1  # does not reset existing state
        assert a.revision == 0  # snapshots are immutable

    def test_snapshots_are_immutable_values(self, tmp_path):
        store = AnnotationStore(tmp_path)
        store.ensure_set("img1", 10, 10)
        before = store.get_set("img1")
        store.commit("img1", AddBox(BBox(0, 0, 5, 5), 0, expected_revision=0))
        assert before.revision == 0
        assert store.get_set("img1").revision == 1
