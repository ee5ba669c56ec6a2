import numpy as np
import pytest

from faceshape.basis import Landmarks3D
from faceshape.errors import SchemaError
from faceshape.projection import (
    Landmarks2D,
    Pose,
    landmark_document,
    load_landmark_frames,
    parse_landmark_document,
    project,
    save_landmark_frames,
)

from conftest import random_pose


def project_oracle(pose, shape):
    """Per-vertex matrix multiplication, independent of the vectorized path."""
    out = []
    for p in shape.as_points():
        rotated = [
            sum(pose.rotation[r][c] * p[c] for c in range(3)) for r in range(3)
        ]
        out.append(pose.scale * rotated[0] + pose.translation[0])
        out.append(pose.scale * rotated[1] + pose.translation[1])
    return np.array(out)


class TestProject:
    def test_identity_pose_drops_z(self):
        pose = Pose(1.0, np.eye(3), np.zeros(2))
        out = project(pose, Landmarks3D(np.array([3.0, 4.0, 5.0])))
        np.testing.assert_array_equal(out.points, [3.0, 4.0])

    def test_scale_then_translate(self):
        pose = Pose(2.0, np.eye(3), np.array([10.0, 10.0]))
        out = project(pose, Landmarks3D(np.array([3.0, 4.0, 5.0])))
        np.testing.assert_array_equal(out.points, [16.0, 18.0])

    def test_matches_per_vertex_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            pose = random_pose(rng)
            shape = Landmarks3D(rng.normal(0, 50, 3 * 17))
            np.testing.assert_allclose(
                project(pose, shape).points, project_oracle(pose, shape), atol=1e-12
            )

    def test_z_shift_invariance_under_identity_rotation(self):
        rng = np.random.default_rng(3)
        pose = Pose(1.7, np.eye(3), np.array([5.0, -2.0]))
        pts = rng.normal(0, 30, (12, 3))
        shifted = pts.copy()
        shifted[:, 2] += 123.4
        np.testing.assert_allclose(
            project(pose, Landmarks3D(pts.reshape(-1))).points,
            project(pose, Landmarks3D(shifted.reshape(-1))).points,
        )

    def test_scale_linearity(self):
        rng = np.random.default_rng(4)
        pose1 = random_pose(rng)
        pose2 = Pose(2.0 * pose1.scale, pose1.rotation, pose1.translation)
        shape = Landmarks3D(rng.normal(0, 40, 3 * 9))
        out1 = project(pose1, shape).points - np.tile(pose1.translation, 9)
        out2 = project(pose2, shape).points - np.tile(pose2.translation, 9)
        np.testing.assert_allclose(out2, 2.0 * out1, rtol=1e-13)


class TestPoseValidation:
    def test_rejects_negative_scale(self):
        with pytest.raises(SchemaError):
            Pose(-1.0, np.eye(3), np.zeros(2))

    def test_rejects_non_orthogonal_rotation(self):
        bad = np.eye(3)
        bad[0, 1] = 0.01
        with pytest.raises(SchemaError):
            Pose(1.0, bad, np.zeros(2))

    def test_rejects_reflection(self):
        with pytest.raises(SchemaError):
            Pose(1.0, np.diag([1.0, 1.0, -1.0]), np.zeros(2))


class TestLandmarkFiles:
    def test_single_document_round_trip(self, tmp_path):
        lm = Landmarks2D(np.arange(10, dtype=float))
        doc = landmark_document(lm, "alice", 3, "unit-test")
        path = tmp_path / "frame.json"
        save_landmark_frames([doc], path)
        frames = load_landmark_frames(path)
        assert len(frames) == 1
        loaded, meta = frames[0]
        np.testing.assert_array_equal(loaded.points, lm.points)
        assert meta == {"subject_label": "alice", "frame_index": 3, "source": "unit-test"}

    def test_document_array_round_trip(self, tmp_path):
        docs = [
            landmark_document(Landmarks2D(np.full(8, float(i))), "bob", i, "unit-test")
            for i in range(5)
        ]
        path = tmp_path / "clip.json"
        save_landmark_frames(docs, path)
        frames = load_landmark_frames(path)
        assert [meta["frame_index"] for _, meta in frames] == list(range(5))

    def test_length_mismatch_rejected(self):
        doc = landmark_document(Landmarks2D(np.zeros(8)), "x", 0, "s")
        doc["L"] = 5
        with pytest.raises(SchemaError, match="does not match L"):
            parse_landmark_document(doc)

    def test_bad_version_rejected(self):
        doc = landmark_document(Landmarks2D(np.zeros(8)), "x", 0, "s")
        doc["format_version"] = 99
        with pytest.raises(SchemaError, match="format_version"):
            parse_landmark_document(doc)

    def test_non_numeric_points_rejected(self):
        doc = landmark_document(Landmarks2D(np.zeros(8)), "x", 0, "s")
        doc["points"] = ["a"] * 8
        with pytest.raises(SchemaError, match="not numeric"):
            parse_landmark_document(doc)
