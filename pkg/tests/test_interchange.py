"""COCO/YOLO interchange: exact examples and round-trip properties."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ayc.annotations import AnnBox, AnnotationSet
from ayc.boxes import BBox
from ayc.errors import (
    DimsMissingError,
    InconsistentDimsError,
    ParseError,
    UnknownClassError,
)
from ayc.interchange import export_coco, export_yolo, import_coco, import_yolo

CLASSES = ["chromosome"]


def make_set(image_id="img1", boxes=(), width=640, height=480) -> AnnotationSet:
    ann = tuple(
        AnnBox(box_id=f"b{k}", bbox=b, class_id=c)
        for k, (b, c) in enumerate(boxes)
    )
    return AnnotationSet(image_id=image_id, boxes=ann, width=width, height=height)


class TestYoloExport:
    def test_known_line(self):
        aset = make_set(boxes=[(BBox(288, 224, 352, 256), 0)])
        payload = export_yolo([aset], CLASSES)
        assert payload["img1"] == "0 0.500000 0.500000 0.100000 0.066667\n"

    def test_empty_set(self):
        assert export_yolo([make_set()], CLASSES) == {"img1": ""}

    def test_dims_required(self):
        aset = AnnotationSet(image_id="x", boxes=(
            AnnBox("b0", BBox(0, 0, 1, 1), 0),
        ))
        with pytest.raises(DimsMissingError):
            export_yolo([aset], CLASSES)

    def test_unknown_class(self):
        aset = make_set(boxes=[(BBox(0, 0, 10, 10), 5)])
        with pytest.raises(UnknownClassError):
            export_yolo([aset], CLASSES)


class TestYoloImport:
    def test_round_trip(self):
        aset = make_set(boxes=[(BBox(288, 224, 352, 256), 0), (BBox(0, 0, 64, 48), 0)])
        payload = export_yolo([aset], CLASSES)
        back = import_yolo(payload, {"img1": (640, 480)})
        assert len(back) == 1
        for orig, imported in zip(aset.boxes, back[0].boxes):
            for attr in ("x_min", "y_min", "x_max", "y_max"):
                got = getattr(imported.bbox, attr)
                want = getattr(orig.bbox, attr)
                assert got == pytest.approx(want, abs=1e-3)

    def test_four_fields_rejected(self):
        with pytest.raises(ParseError):
            import_yolo({"img1": "0 0.5 0.5 0.1\n"}, {"img1": (640, 480)})

    def test_non_numeric_rejected(self):
        with pytest.raises(ParseError):
            import_yolo({"img1": "0 a b c d\n"}, {"img1": (640, 480)})

    def test_missing_dims(self):
        with pytest.raises(InconsistentDimsError):
            import_yolo({"img1": ""}, {})

    def test_sets_start_at_revision_zero(self):
        back = import_yolo({"img1": "0 0.5 0.5 0.1 0.1\n"}, {"img1": (100, 100)})
        assert back[0].revision == 0
        assert back[0].boxes[0].provenance == "human"

    @settings(max_examples=60, deadline=None)
    @given(st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=999),
            st.integers(min_value=0, max_value=799),
            st.integers(min_value=1, max_value=200),
            st.integers(min_value=1, max_value=200),
        ),
        max_size=12,
    ))
    def test_round_trip_integer_boxes_exact(self, raw):
        # dims 1000x800: integer-pixel boxes normalize to exact 6-decimal
        # values, so the printed form loses nothing
        boxes = [
            (BBox(x, y, min(x + w, 1000), min(y + h, 800)), 0)
            for x, y, w, h in raw
        ]
        aset = make_set(boxes=boxes, width=1000, height=800)
        payload = export_yolo([aset], CLASSES)
        back = import_yolo(payload, {"img1": (1000, 800)})
        for orig, imported in zip(aset.boxes, back[0].boxes):
            for attr in ("x_min", "y_min", "x_max", "y_max"):
                assert getattr(imported.bbox, attr) == pytest.approx(
                    getattr(orig.bbox, attr), abs=1e-6
                )


class TestCocoExport:
    def test_structure(self):
        aset = make_set(boxes=[(BBox(10, 20, 40, 60), 0)])
        doc = export_coco([aset], CLASSES)
        assert doc["categories"] == [{"id": 1, "name": "chromosome"}]
        assert doc["images"][0]["width"] == 640
        ann = doc["annotations"][0]
        assert ann["bbox"] == [10, 20, 30, 40]
        assert ann["category_id"] == 1

    def test_empty_set_valid(self):
        doc = export_coco([make_set()], CLASSES)
        assert doc["annotations"] == []
        assert len(doc["images"]) == 1
        json.dumps(doc)  # serializable

    def test_round_trip(self):
        boxes = [(BBox(10.5, 20.25, 40.75, 60.125), 0), (BBox(0, 0, 5, 5), 0)]
        aset = make_set(boxes=boxes)
        doc = export_coco([aset], CLASSES)
        sets, class_names = import_coco(json.dumps(doc))
        assert class_names == CLASSES
        assert len(sets) == 1
        for orig, imported in zip(aset.boxes, sets[0].boxes):
            for attr in ("x_min", "y_min", "x_max", "y_max"):
                assert getattr(imported.bbox, attr) == pytest.approx(
                    getattr(orig.bbox, attr), abs=1e-9
                )


class TestCocoImport:
    def test_malformed_json(self):
        with pytest.raises(ParseError):
            import_coco("{not json")

    def test_missing_arrays(self):
        with pytest.raises(ParseError):
            import_coco({"images": []})

    def test_unknown_category_reference(self):
        doc = {
            "images": [{"id": 1, "file_name": "a.png", "width": 10, "height": 10}],
            "annotations": [{"id": 1, "image_id": 1, "category_id": 99, "bbox": [0, 0, 1, 1]}],
            "categories": [{"id": 1, "name": "c"}],
        }
        with pytest.raises(ParseError):
            import_coco(doc)

    def test_unknown_image_reference(self):
        doc = {
            "images": [],
            "annotations": [{"id": 1, "image_id": 7, "category_id": 1, "bbox": [0, 0, 1, 1]}],
            "categories": [{"id": 1, "name": "c"}],
        }
        with pytest.raises(ParseError):
            import_coco(doc)

    def test_file_name_stem_becomes_image_id(self):
        doc = {
            "images": [{"id": 3, "file_name": "slide_042.jpg", "width": 10, "height": 10}],
            "annotations": [],
            "categories": [{"id": 1, "name": "c"}],
        }
        sets, _ = import_coco(doc)
        assert sets[0].image_id == "slide_042"

    def test_noncontiguous_category_ids(self):
        doc = {
            "images": [{"id": 1, "file_name": "a.png", "width": 100, "height": 100}],
            "annotations": [
                {"id": 1, "image_id": 1, "category_id": 10, "bbox": [1, 1, 2, 2]},
            ],
            "categories": [{"id": 5, "name": "first"}, {"id": 10, "name": "second"}],
        }
        sets, class_names = import_coco(doc)
        assert class_names == ["first", "second"]
        assert sets[0].boxes[0].class_id == 1


class TestCrossFormat:
    def test_coco_yolo_coco_chain(self):
        # integer boxes in a 1000x800 frame survive the YOLO leg exactly
        boxes = [(BBox(100, 80, 340, 400), 0), (BBox(0, 0, 1000, 800), 0)]
        original = make_set(boxes=boxes, width=1000, height=800)
        coco1 = export_coco([original], CLASSES)

        sets1, class_names = import_coco(coco1)
        yolo = export_yolo(sets1, class_names)
        sets2 = import_yolo(yolo, {"img1": (1000, 800)})
        coco2 = export_coco(sets2, class_names)

        anns1 = {a["id"]: a["bbox"] for a in coco1["annotations"]}
        anns2 = {a["id"]: a["bbox"] for a in coco2["annotations"]}
        assert anns1.keys() == anns2.keys()
        for key in anns1:
            assert anns1[key] == pytest.approx(anns2[key], abs=1e-6)
