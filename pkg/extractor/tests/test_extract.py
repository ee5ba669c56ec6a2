import json

import cv2
import numpy as np
import pytest

from faceshape_extract.cli import main
from faceshape_extract.detectors import MarkerDetector, get_detector, render_marker_image
from faceshape_extract.extract import extract

from conftest import oval_face_landmarks


class TestMarkerDetector:
    def test_round_trip_accuracy(self, rng):
        truth = oval_face_landmarks(rng)
        image = render_marker_image(truth)
        detection = MarkerDetector().detect(image)
        assert detection is not None
        assert detection.confidence == 1.0
        errors = np.linalg.norm(detection.landmarks - truth, axis=1)
        assert errors.max() <= 3.0

    def test_blank_image_is_no_face(self):
        blank = np.full((64, 64, 3), 255, dtype=np.uint8)
        assert MarkerDetector().detect(blank) is None

    def test_partial_overlay_is_no_face(self, rng):
        truth = oval_face_landmarks(rng)
        image = render_marker_image(truth)
        # paint over the top of the oval, removing several markers
        cv2.rectangle(image, (0, 0), (512, 170), (255, 255, 255), thickness=-1)
        assert MarkerDetector().detect(image) is None

    def test_unknown_detector_name(self):
        with pytest.raises(ValueError, match="unknown detector"):
            get_detector("nope")


class TestExtract:
    def test_single_image(self, tmp_path, rng):
        truth = oval_face_landmarks(rng)
        image_path = tmp_path / "face.png"
        cv2.imwrite(str(image_path), render_marker_image(truth))
        out = tmp_path / "landmarks"
        records = extract(image_path, out)
        assert len(records) == 1
        record = records[0]
        assert record.face_found
        assert record.frame_index == 0
        doc = json.loads((out / "face_f000000.json").read_text())
        assert doc["format_version"] == 1
        assert doc["L"] == 68
        assert doc["subject_label"] == "face"
        assert len(doc["points"]) == 136
        got = np.asarray(doc["points"]).reshape(68, 2)
        assert np.linalg.norm(got - truth, axis=1).max() <= 3.0

    def test_no_face_emits_record_but_no_file(self, tmp_path):
        image_path = tmp_path / "empty.png"
        cv2.imwrite(str(image_path), np.full((64, 64, 3), 255, dtype=np.uint8))
        out = tmp_path / "landmarks"
        records = extract(image_path, out)
        assert len(records) == 1
        assert not records[0].face_found
        assert records[0].landmark_file is None
        assert list(out.glob("*.json")) == [out / "extraction_records.json"]
        manifest = json.loads((out / "extraction_records.json").read_text())
        assert manifest[0]["face_found"] is False

    def test_directory_with_stride_keeps_source_ordinals(self, tmp_path, rng):
        media = tmp_path / "clip"
        media.mkdir()
        for i in range(6):
            truth = oval_face_landmarks(np.random.default_rng(i))
            cv2.imwrite(str(media / f"frame_{i:03d}.png"), render_marker_image(truth))
        out = tmp_path / "landmarks"
        records = extract(media, out, every=2, subject_label="clip")
        assert [r.frame_index for r in records] == [0, 2, 4]
        assert all(r.face_found for r in records)

    def test_video_frames(self, tmp_path, rng):
        video_path = tmp_path / "clip.avi"
        writer = cv2.VideoWriter(
            str(video_path), cv2.VideoWriter_fourcc(*"FFV1"), 10.0, (512, 512)
        )
        if not writer.isOpened():
            pytest.skip("no lossless video codec available")
        truths = []
        for i in range(4):
            truth = oval_face_landmarks(np.random.default_rng(100 + i))
            truths.append(truth)
            writer.write(render_marker_image(truth))
        writer.release()
        out = tmp_path / "landmarks"
        records = extract(video_path, out, subject_label="vid")
        assert [r.frame_index for r in records] == [0, 1, 2, 3]
        for record, truth in zip(records, truths):
            assert record.face_found
            doc = json.loads((tmp_path / record.landmark_file).read_text()
                             if not record.landmark_file.startswith("/")
                             else open(record.landmark_file).read())
            got = np.asarray(doc["points"]).reshape(68, 2)
            assert np.linalg.norm(got - truth, axis=1).max() <= 3.0


class TestCli:
    def test_happy_path(self, tmp_path, rng, capsys):
        image_path = tmp_path / "face.png"
        cv2.imwrite(str(image_path), render_marker_image(oval_face_landmarks(rng)))
        code = main([str(image_path), "--out", str(tmp_path / "lm"), "--subject", "alice"])
        assert code == 0
        assert "1 with a detected face" in capsys.readouterr().out
        doc = json.loads((tmp_path / "lm" / "face_f000000.json").read_text())
        assert doc["subject_label"] == "alice"

    def test_missing_media_exits_2(self, tmp_path):
        assert main([str(tmp_path / "nothing.png"), "--out", str(tmp_path / "o")]) == 2

    def test_unsupported_media_exits_2(self, tmp_path):
        weird = tmp_path / "data.xyz"
        weird.write_text("not media")
        assert main([str(weird), "--out", str(tmp_path / "o")]) == 2

    def test_bad_stride_exits_2(self, tmp_path, rng):
        image_path = tmp_path / "face.png"
        cv2.imwrite(str(image_path), render_marker_image(oval_face_landmarks(rng)))
        assert main([str(image_path), "--out", str(tmp_path / "o"), "--every", "0"]) == 2
