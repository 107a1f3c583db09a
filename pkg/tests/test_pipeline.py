import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auglift.pipeline import (
    AugLiftConfig,
    augment_frame,
    compute_bbox_stats,
    compute_mean_box_size,
    normalize_confidence,
    normalize_depths,
    rescale_pose,
    sample_keypoint_depth,
)
from auglift.skeleton import ConfidenceVec, DepthRaster, DetectionFrame, Pose2D

RASTER_3X3 = DepthRaster(np.array([[5.0, 4.0, 7.0], [3.0, 9.0, 6.0], [8.0, 2.0, 1.0]]))


def brute_force_disk_min(data: np.ndarray, x: float, y: float, r: float) -> float:
    """Independent oracle: exhaustive min over the clamped pixel disk."""
    h, w = data.shape
    u0 = int(np.clip(np.rint(x), 0, w - 1))
    v0 = int(np.clip(np.rint(y), 0, h - 1))
    best = np.inf
    for v in range(h):
        for u in range(w):
            if (u - u0) ** 2 + (v - v0) ** 2 <= r * r:
                best = min(best, data[v, u])
    return float(best)


class TestSampleKeypointDepth:
    def test_center_disk_r1(self):
        # disk around (1,1): {(1,1)=9, (1,0)=4, (0,1)=3, (2,1)=6, (1,2)=2} -> 2
        assert sample_keypoint_depth(RASTER_3X3, (1, 1), 1) == 2.0
        assert brute_force_disk_min(RASTER_3X3.data, 1, 1, 1) == 2.0

    def test_r0_returns_center_pixel(self):
        assert sample_keypoint_depth(RASTER_3X3, (1, 1), 0) == 9.0

    def test_constant_raster(self):
        raster = DepthRaster(np.full((5, 7), 4.2, dtype=np.float32))
        for kp in [(0, 0), (3.4, 2.2), (100, -5)]:
            for r in (0, 1, 3):
                assert sample_keypoint_depth(raster, kp, r) == np.float32(4.2)

    def test_result_never_exceeds_center_pixel(self):
        rng = np.random.default_rng(5)
        data = rng.uniform(0.5, 9.0, size=(8, 8))
        raster = DepthRaster(data)
        for _ in range(50):
            kp = rng.uniform(-2, 9, size=2)
            u0 = int(np.clip(np.rint(kp[0]), 0, 7))
            v0 = int(np.clip(np.rint(kp[1]), 0, 7))
            assert sample_keypoint_depth(raster, kp, 2) <= raster.data[v0, u0]

    def test_brute_force_equivalence_random_rasters(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            h, w = rng.integers(1, 17, size=2)
            data = rng.uniform(0.1, 10.0, size=(h, w))
            raster = DepthRaster(data)
            kp = rng.uniform(-3, max(h, w) + 3, size=2)
            for r in range(4):
                assert sample_keypoint_depth(raster, kp, r) == pytest.approx(
                    brute_force_disk_min(raster.data, kp[0], kp[1], r), abs=0
                )

    def test_monotone_in_radius(self):
        rng = np.random.default_rng(7)
        data = rng.uniform(0.1, 10.0, size=(12, 12))
        raster = DepthRaster(data)
        for _ in range(20):
            kp = rng.uniform(0, 12, size=2)
            vals = [sample_keypoint_depth(raster, kp, r) for r in (0, 1, 2, 3)]
            assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_out_of_frame_keypoint_clamps_to_border(self):
        # center clamps to nearest border pixel (2,2) whose value is 1
        assert sample_keypoint_depth(RASTER_3X3, (10, 10), 0) == 1.0

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            sample_keypoint_depth(RASTER_3X3, (1, 1), -1)


class TestBboxStats:
    def test_square(self):
        centroid, b = compute_bbox_stats(Pose2D(np.array([[0, 0], [2, 0], [0, 2], [2, 2]])))
        assert np.allclose(centroid, (1, 1))
        assert b == 2.0

    def test_degenerate_cluster(self):
        centroid, b = compute_bbox_stats(Pose2D(np.full((4, 2), 5.0)))
        assert np.allclose(centroid, (5, 5))
        assert b == 0.0

    def test_two_points(self):
        centroid, b = compute_bbox_stats(Pose2D(np.array([[0, 0], [4, 2]])))
        assert np.allclose(centroid, (2, 1))
        assert b == 3.0

    def test_single_keypoint_rejected(self):
        with pytest.raises(ValueError):
            compute_bbox_stats(Pose2D(np.array([[1.0, 1.0]])))


class TestRescalePose:
    def test_doubling(self):
        pose = Pose2D(np.array([[0, 0], [2, 0], [0, 2], [2, 2]], dtype=float))
        out, degenerate = rescale_pose(pose, 4.0)
        assert not degenerate
        assert np.allclose(out.coords, [[-1, -1], [3, -1], [-1, 3], [3, 3]])

    def test_identity_when_b_equals_bbar(self):
        pose = Pose2D(np.array([[0, 0], [2, 0], [0, 2], [2, 2]], dtype=float))
        out, _ = rescale_pose(pose, 2.0)
        assert np.allclose(out.coords, pose.coords)

    def test_degenerate_passthrough(self):
        pose = Pose2D(np.full((3, 2), 1.5))
        out, degenerate = rescale_pose(pose, 4.0)
        assert degenerate
        assert np.allclose(out.coords, pose.coords)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), bbar=st.floats(0.1, 1000))
    def test_centroid_preserved_and_box_mapped(self, seed, bbar):
        rng = np.random.default_rng(seed)
        pose = Pose2D(rng.uniform(-100, 100, size=(rng.integers(2, 20), 2)))
        c0, b0 = compute_bbox_stats(pose)
        out, degenerate = rescale_pose(pose, bbar)
        if degenerate:
            return
        c1, b1 = compute_bbox_stats(out)
        assert np.all(np.abs(c1 - c0) <= 1e-9 * np.maximum(np.abs(c0), 1.0))
        assert abs(b1 - bbar) <= 1e-9 * bbar
        again, _ = rescale_pose(out, bbar)
        assert np.all(np.abs(again.coords - out.coords) <= 1e-9 * np.maximum(np.abs(out.coords), 1.0))


class TestMeanBoxSize:
    def test_mean_of_two(self):
        poses = [
            Pose2D(np.array([[0, 0], [2, 0], [0, 2]], dtype=float)),  # b = 2
            Pose2D(np.array([[0, 0], [4, 0], [0, 4]], dtype=float)),  # b = 4
        ]
        assert compute_mean_box_size(poses) == pytest.approx(3.0)

    def test_single_frame(self):
        pose = Pose2D(np.array([[0, 0], [7, 0], [0, 7]], dtype=float))
        assert compute_mean_box_size([pose]) == pytest.approx(7.0)

    def test_degenerate_frames_excluded(self):
        poses = [
            Pose2D(np.array([[0, 0], [2, 0], [0, 2]], dtype=float)),  # b = 2
            Pose2D(np.full((3, 2), 1.0)),  # degenerate
            Pose2D(np.array([[0, 0], [4, 0], [0, 4]], dtype=float)),  # b = 4
        ]
        assert compute_mean_box_size(poses) == pytest.approx(3.0)

    def test_all_degenerate_rejected(self):
        with pytest.raises(ValueError):
            compute_mean_box_size([Pose2D(np.full((3, 2), 1.0))])
        with pytest.raises(ValueError):
            compute_mean_box_size([])


class TestNormalizeConfidence:
    def test_examples(self):
        out = normalize_confidence(ConfidenceVec(np.array([0.5, 1.0, 0.0, 0.75])))
        assert np.allclose(out, [0.0, 1.0, -1.0, 0.5])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            normalize_confidence([1.5])

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(0, 1), b=st.floats(0, 1))
    def test_order_preserving(self, a, b):
        ca, cb = normalize_confidence([a, b])
        # strict order preserved whenever the gap survives float64 rounding
        if b - a > 1e-12:
            assert ca < cb
        elif a - b > 1e-12:
            assert ca > cb
        else:
            assert abs(ca - cb) <= 4e-12


class TestNormalizeDepths:
    def test_plain_relative(self):
        out = normalize_depths([5.0, 6.5], root_index=0, d_max=2.0)
        assert np.allclose(out, [0.0, 1.5])

    def test_upper_clip(self):
        out = normalize_depths([5.0, 8.0], root_index=0, d_max=2.0)
        assert out[1] == 2.0

    def test_lower_clip(self):
        out = normalize_depths([5.0, 4.0], root_index=0, d_max=2.0, clip_lower=0.0)
        assert out[1] == 0.0

    def test_root_is_zero_with_default_clip(self):
        out = normalize_depths([3.3, 2.0, 9.9], root_index=0, d_max=2.0)
        assert out[0] == 0.0

    def test_negative_clip_lower_keeps_front_ordering(self):
        out = normalize_depths([5.0, 4.9, 4.0], root_index=0, d_max=2.0, clip_lower=-0.5)
        assert np.allclose(out, [0.0, -0.1, -0.5])

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            normalize_depths([1.0], 0, d_max=0.5, clip_lower=0.5)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_output_always_in_bounds(self, seed):
        rng = np.random.default_rng(seed)
        d = rng.uniform(0.1, 10, size=8)
        out = normalize_depths(d, root_index=3, d_max=2.0)
        assert np.all(out >= 0.0) and np.all(out <= 2.0)


class TestAugmentFrame:
    def _frame(self, coords, conf):
        return DetectionFrame(
            pose=Pose2D(np.asarray(coords, dtype=float)),
            conf=ConfidenceVec(np.asarray(conf, dtype=float)),
            frame_id=0,
        )

    def test_identity_case(self):
        # constant depth, full confidence, b == b-bar: features are (x, y, 1, 0)
        raster = DepthRaster(np.full((16, 16), 3.0, dtype=np.float32))
        coords = [[2.0, 2.0], [10.0, 2.0], [2.0, 10.0], [10.0, 10.0]]
        frame = self._frame(coords, [1.0] * 4)
        cfg = AugLiftConfig(mean_box_size=8.0)
        out = augment_frame(frame, raster, cfg)
        assert not out.degenerate_bbox
        assert np.allclose(out.features[:, :2], coords)
        assert np.allclose(out.features[:, 2], 1.0)
        assert np.allclose(out.features[:, 3], 0.0)

    def test_rescaling_disabled_passthrough(self):
        raster = DepthRaster(np.full((16, 16), 3.0, dtype=np.float32))
        coords = [[2.0, 2.0], [9.0, 5.0], [4.0, 12.0]]
        frame = self._frame(coords, [0.5, 0.25, 1.0])
        cfg = AugLiftConfig(rescaling_enabled=False)
        out = augment_frame(frame, raster, cfg)
        assert np.allclose(out.features[:, :2], coords)
        assert np.allclose(out.features[:, 2], [0.0, -0.5, 1.0])

    def test_depth_channel_matches_component_oracle(self):
        # embed the 3x3 example at the top-left of a larger constant raster
        data = np.full((8, 8), 20.0)
        data[:3, :3] = RASTER_3X3.data
        raster = DepthRaster(data)
        coords = [[1.0, 1.0], [0.0, 0.0], [2.0, 2.0]]
        frame = self._frame(coords, [1.0, 1.0, 1.0])
        cfg = AugLiftConfig(radius_r=1.0, rescaling_enabled=False, d_max=100.0)
        out = augment_frame(frame, raster, cfg)
        expected = [
            brute_force_disk_min(data, x, y, 1.0) for x, y in coords
        ]
        root = expected[0]
        assert np.allclose(out.features[:, 3], np.clip(np.subtract(expected, root), 0, 100))

    def test_depth_sampled_before_rescaling(self):
        # gradient raster: if depth were sampled after rescaling, moving the
        # keypoints would change the sampled values
        data = np.tile(np.arange(1.0, 17.0), (16, 1))
        raster = DepthRaster(data)
        coords = [[4.0, 8.0], [8.0, 8.0], [12.0, 8.0]]
        frame = self._frame(coords, [1.0, 1.0, 1.0])
        cfg_big = AugLiftConfig(radius_r=0.0, mean_box_size=100.0, d_max=50.0)
        cfg_off = AugLiftConfig(radius_r=0.0, rescaling_enabled=False, d_max=50.0)
        assert np.allclose(
            augment_frame(frame, raster, cfg_big).features[:, 3],
            augment_frame(frame, raster, cfg_off).features[:, 3],
        )

    def test_degenerate_bbox_flagged_and_skipped(self):
        raster = DepthRaster(np.full((8, 8), 3.0, dtype=np.float32))
        frame = self._frame([[4.0, 4.0]] * 3, [0.5] * 3)
        out = augment_frame(frame, raster, AugLiftConfig(mean_box_size=5.0))
        assert out.degenerate_bbox
        assert np.allclose(out.features[:, :2], 4.0)

    def test_missing_mean_box_size_rejected(self):
        raster = DepthRaster(np.full((8, 8), 3.0, dtype=np.float32))
        frame = self._frame([[1, 1], [5, 5]], [0.5, 0.5])
        with pytest.raises(ValueError):
            augment_frame(frame, raster, AugLiftConfig())

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        raster = DepthRaster(rng.uniform(1, 5, size=(32, 32)))
        frame = self._frame(rng.uniform(0, 31, size=(17, 2)), rng.uniform(0, 1, size=17))
        cfg = AugLiftConfig(mean_box_size=12.0)
        a = augment_frame(frame, raster, cfg)
        b = augment_frame(frame, raster, cfg)
        assert a.features.tobytes() == b.features.tobytes()
