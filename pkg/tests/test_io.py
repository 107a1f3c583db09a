import numpy as np
import pytest

from auglift import io as alio
from auglift.skeleton import ConfidenceVec, DepthRaster, DetectionFrame, Pose2D, Pose3D


def _frames(rng, n=5, k=17):
    out = []
    for i in range(n):
        out.append(
            DetectionFrame(
                pose=Pose2D(rng.uniform(0, 100, size=(k, 2))),
                conf=ConfidenceVec(rng.uniform(0, 1, size=k)),
                frame_id=i,
                subject_id=0,
            )
        )
    return out


class TestDetectionsJsonl:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        frames = _frames(rng)
        path = tmp_path / "detections.jsonl"
        alio.write_detections_jsonl(path, frames)
        back = alio.read_detections_jsonl(path)
        assert len(back) == len(frames)
        for a, b in zip(frames, back):
            assert a.frame_id == b.frame_id
            assert np.array_equal(a.pose.coords, b.pose.coords)
            assert np.array_equal(a.conf.values, b.conf.values)

    def test_write_is_deterministic(self, tmp_path):
        frames = _frames(np.random.default_rng(1))
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        alio.write_detections_jsonl(p1, frames)
        alio.write_detections_jsonl(p2, frames)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_record_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"frame_id": 0, "keypoints": [[1, 2]]}\n')
        with pytest.raises(ValueError, match="bad.jsonl:1"):
            alio.read_detections_jsonl(path)

    def test_validator_passes_and_flags(self, tmp_path):
        path = tmp_path / "d.jsonl"
        alio.write_detections_jsonl(path, _frames(np.random.default_rng(2), k=17))
        assert alio.validate_detections_file(path, joint_count=17) == []
        assert alio.validate_detections_file(path, joint_count=16) != []


class TestGtJsonl:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        poses = [(i, Pose3D(rng.normal(size=(17, 3)) * 100)) for i in range(4)]
        path = tmp_path / "gt.jsonl"
        alio.write_gt_jsonl(path, poses)
        back = alio.read_gt_jsonl(path)
        for (f0, p0), (f1, p1) in zip(poses, back):
            assert f0 == f1
            assert np.array_equal(p0.joints, p1.joints)


class TestPfm:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(4)
        raster = DepthRaster(rng.uniform(0.5, 9.0, size=(13, 9)).astype(np.float32))
        path = tmp_path / "d.pfm"
        alio.write_pfm(path, raster)
        back = alio.read_pfm(path)
        assert back.data.tobytes() == raster.data.tobytes()

    def test_header_is_little_endian_scale(self, tmp_path):
        path = tmp_path / "d.pfm"
        alio.write_pfm(path, np.ones((2, 3), dtype=np.float32))
        raw = path.read_bytes()
        assert raw.startswith(b"Pf\n3 2\n-1.0\n")

    def test_row_order_is_bottom_up(self, tmp_path):
        data = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        path = tmp_path / "d.pfm"
        alio.write_pfm(path, data)
        payload = path.read_bytes().split(b"-1.0\n", 1)[1]
        first_stored_row = np.frombuffer(payload[:8], dtype="<f4")
        assert np.array_equal(first_stored_row, data[1])  # bottom row first

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "d.pfm"
        alio.write_pfm(path, np.ones((4, 4), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ValueError, match="truncated"):
            alio.read_pfm(path)

    def test_nan_rejected_at_load(self, tmp_path):
        data = np.ones((2, 2), dtype=np.float32)
        path = tmp_path / "d.pfm"
        alio.write_pfm(path, data)
        raw = bytearray(path.read_bytes())
        raw[-4:] = np.array([np.nan], dtype="<f4").tobytes()
        path.write_bytes(bytes(raw))
        assert alio.validate_pfm_file(path) != []
        with pytest.raises(ValueError):
            alio.read_pfm(path)


class TestAugmentedValidation:
    def _write(self, path, rows, od=None):
        recs = []
        for i, feats in enumerate(rows):
            rec = {
                "frame_id": i,
                "subject_id": 0,
                "features": [[float(v) for v in r] for r in feats],
                "degenerate_bbox": False,
            }
            if od is not None:
                rec["od"] = [float(v) for v in od[i]]
            recs.append(rec)
        alio.write_augmented_jsonl(path, recs)

    def test_valid_file_passes(self, tmp_path):
        k = 17
        feats = np.zeros((k, 4))
        feats[:, 0] = np.arange(k)
        feats[:, 2] = 0.5
        feats[:, 3] = 1.0
        feats[0, 3] = 0.0  # root depth
        path = tmp_path / "aug.jsonl"
        self._write(path, [feats])
        assert alio.validate_augmented_file(path, joint_count=k) == []

    def test_out_of_range_depth_flagged(self, tmp_path):
        k = 17
        feats = np.zeros((k, 4))
        feats[3, 3] = 99.0
        path = tmp_path / "aug.jsonl"
        self._write(path, [feats])
        errors = alio.validate_augmented_file(path, joint_count=k, d_max=2.0)
        assert any("depth" in e for e in errors)

    def test_nonzero_root_depth_flagged(self, tmp_path):
        k = 17
        feats = np.zeros((k, 4))
        feats[0, 3] = 0.5
        path = tmp_path / "aug.jsonl"
        self._write(path, [feats])
        errors = alio.validate_augmented_file(path, joint_count=k)
        assert any("root depth" in e for e in errors)

    def test_od_round_trip(self, tmp_path):
        k = 4
        feats = np.zeros((k, 4))
        path = tmp_path / "aug.jsonl"
        self._write(path, [feats], od=[[-1.0, 0.0, 1.0, 0.0]])
        rec = alio.read_augmented_jsonl(path)[0]
        assert np.array_equal(rec["od"], [-1.0, 0.0, 1.0, 0.0])
