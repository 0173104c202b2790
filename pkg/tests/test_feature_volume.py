"""
Tests for feature extraction and the linear feature volume.
"""

import numpy as np
import pytest

from models.feature_map import FeatureMap
from models.geometry import DepthImage, Intrinsics, Pose, compose
from processors.base import ProtocolViolationError, VolumeConfigError
from processors.feature_extractor import FeatureMode, extract_features
from processors.feature_volume import FeatureVolume, TsdfProjectionHead
from processors.tsdf_volume import TsdfVolume

BOUNDS = ((-1.0, -1.0, 0.5), (1.0, 1.0, 2.5))


@pytest.fixture
def small_camera():
    return Intrinsics(fx=40.0, fy=40.0, cx=16.0, cy=12.0, width=32, height=24)


@pytest.fixture
def pixel_camera():
    return Intrinsics(fx=10.0, fy=10.0, cx=2.0, cy=2.0, width=5, height=5)


def constant_features(k: Intrinsics, values) -> FeatureMap:
    values = np.asarray(values, dtype=float)
    data = np.broadcast_to(values, (k.height, k.width, len(values)))
    return FeatureMap(k.width, k.height, len(values), data)


def random_depth(rng: np.random.Generator, k: Intrinsics) -> DepthImage:
    data = rng.uniform(1.0, 2.5, size=(k.height, k.width)).astype(np.float32)
    data[rng.random(data.shape) < 0.1] = 0.0
    return DepthImage.from_array(data)


def random_pose(rng: np.random.Generator) -> Pose:
    return compose(Pose.translate(*rng.uniform(-0.2, 0.2, size=3)),
                   Pose.rot_x(rng.uniform(-10.0, 10.0)))


class TestFeatureExtraction:
    """Test the synthetic feature extractors"""

    def test_identity_depth(self):
        depth = DepthImage.from_array(np.full((24, 32), 2.0, dtype=np.float32))
        fmap = extract_features(depth, FeatureMode.IDENTITY_DEPTH)
        assert fmap.channels == 1
        assert np.all(fmap.data == 2.0)

    def test_identity_depth_zeroes_invalid_pixels(self):
        depth = DepthImage.from_array(np.array([[1.5, -1.0], [np.nan, 0.0]]))
        fmap = extract_features(depth, "identity-depth")
        assert fmap.data[..., 0].tolist() == [[1.5, 0.0], [0.0, 0.0]]

    def test_hashed_is_deterministic(self):
        depth = DepthImage.from_array(np.ones((6, 8), dtype=np.float32))
        first = extract_features(depth, FeatureMode.HASHED, frame_id=3)
        second = extract_features(depth, FeatureMode.HASHED, frame_id=3)
        assert first == second
        assert first.channels == 8
        assert np.all((first.data >= -1.0) & (first.data < 1.0))

    def test_hashed_differs_between_frames(self):
        depth = DepthImage.from_array(np.ones((6, 8), dtype=np.float32))
        maps = [extract_features(depth, FeatureMode.HASHED, frame_id=i) for i in range(20)]
        for i in range(len(maps)):
            for j in range(i + 1, len(maps)):
                assert maps[i] != maps[j]

    def test_feature_map_rejects_bad_size(self):
        with pytest.raises(ValueError):
            FeatureMap(4, 3, 2, np.zeros(23))


class TestBackprojection:
    """Test running-average fusion and its exact inverse"""

    def single_voxel(self, channels: int = 2) -> FeatureVolume:
        return FeatureVolume(origin=(0.0, 0.0, 1.0), voxel_size=0.04, dims=(1, 1, 1),
                             channels=channels)

    def test_running_mean(self, pixel_camera):
        volume = self.single_voxel()
        volume.backproject_integrate(constant_features(pixel_camera, [2, 4]), Pose.identity(),
                                     pixel_camera)
        single = volume.copy()
        volume.backproject_integrate(constant_features(pixel_camera, [4, 8]), Pose.identity(),
                                     pixel_camera)
        assert volume.features()[0, 0, 0].tolist() == [3.0, 6.0]
        assert volume.count[0, 0, 0] == 2.0

        volume.backproject_integrate(constant_features(pixel_camera, [4, 8]), Pose.identity(),
                                     pixel_camera, sign=-1)
        assert volume.features()[0, 0, 0].tolist() == [2.0, 4.0]
        assert volume.count[0, 0, 0] == 1.0
        assert volume.state_equals(single)

    def test_voxels_without_depth_are_still_updated(self, pixel_camera):
        volume = self.single_voxel(channels=1)
        volume.backproject_integrate(constant_features(pixel_camera, [0.0]), Pose.identity(),
                                     pixel_camera)
        assert volume.count[0, 0, 0] == 1.0

    def test_protocol_violation(self, pixel_camera):
        volume = self.single_voxel()
        with pytest.raises(ProtocolViolationError):
            volume.backproject_integrate(constant_features(pixel_camera, [1, 1]),
                                         Pose.identity(), pixel_camera, sign=-1)
        assert volume.count[0, 0, 0] == 0.0

    def test_channel_mismatch(self, pixel_camera):
        with pytest.raises(VolumeConfigError):
            self.single_voxel(channels=3).backproject_integrate(
                constant_features(pixel_camera, [1, 1]), Pose.identity(), pixel_camera)

    def test_order_invariance(self, small_camera):
        rng = np.random.default_rng(11)
        views = [(extract_features(random_depth(rng, small_camera), FeatureMode.HASHED, i),
                  random_pose(rng)) for i in range(10)]
        volumes = []
        for order in (np.arange(len(views)), rng.permutation(len(views))):
            volume = FeatureVolume.from_bounds(BOUNDS, 0.1, channels=8)
            for index in order:
                volume.backproject_integrate(views[index][0], views[index][1], small_camera)
            volumes.append(volume)
        np.testing.assert_allclose(volumes[0].features(), volumes[1].features(),
                                   atol=1e-5, equal_nan=True)

    def test_removing_latest_and_earlier_views(self, small_camera):
        rng = np.random.default_rng(12)
        views = [(extract_features(random_depth(rng, small_camera), FeatureMode.HASHED, i),
                  random_pose(rng)) for i in range(6)]
        volume = FeatureVolume.from_bounds(BOUNDS, 0.1, channels=8)
        for fmap, pose in views[:-1]:
            volume.backproject_integrate(fmap, pose, small_camera)
        previous = volume.copy()
        volume.backproject_integrate(*views[-1], small_camera)
        volume.backproject_integrate(*views[-1], small_camera, sign=-1)
        assert volume.state_equals(previous)

        volume.backproject_integrate(*views[2], small_camera, sign=-1)
        oracle = FeatureVolume.from_bounds(BOUNDS, 0.1, channels=8)
        for index, (fmap, pose) in enumerate(views[:-1]):
            if index != 2:
                oracle.backproject_integrate(fmap, pose, small_camera)
        np.testing.assert_allclose(volume.feature_sum, oracle.feature_sum, atol=1e-6)
        np.testing.assert_array_equal(volume.count, oracle.count)


class TestTsdfEquivalence:
    """Identity-depth features through a TSDF head reproduce the TSDF volume"""

    def test_matches_tsdf_volume(self, small_camera):
        rng = np.random.default_rng(21)
        for _ in range(10):
            tsdf = TsdfVolume.from_bounds(BOUNDS, 0.1, truncation=0.3)
            features = FeatureVolume.from_bounds(BOUNDS, 0.1, channels=1,
                                                 head=TsdfProjectionHead(0.3))
            for frame_id in range(5):
                depth, pose = random_depth(rng, small_camera), random_pose(rng)
                tsdf.integrate_depth(depth, pose, small_camera)
                fmap = extract_features(depth, FeatureMode.IDENTITY_DEPTH, frame_id)
                features.backproject_integrate(fmap, pose, small_camera)
            np.testing.assert_array_equal(features.count, tsdf.weight_sum)
            np.testing.assert_allclose(features.features()[..., 0], tsdf.tsdf(),
                                       atol=1e-6, equal_nan=True)

    def test_meshes_agree(self, small_camera):
        rng = np.random.default_rng(22)
        tsdf = TsdfVolume.from_bounds(BOUNDS, 0.1, truncation=0.3)
        features = FeatureVolume.from_bounds(BOUNDS, 0.1, channels=1,
                                             head=TsdfProjectionHead(0.3))
        depth = DepthImage.from_array(np.full((24, 32), 1.5, dtype=np.float32))
        for frame_id in range(3):
            pose = random_pose(rng)
            tsdf.integrate_depth(depth, pose, small_camera)
            features.backproject_integrate(extract_features(depth, frame_id=frame_id), pose,
                                           small_camera)
        tsdf_mesh, feature_mesh = tsdf.extract_mesh(), features.extract_mesh()
        assert not tsdf_mesh.is_empty
        np.testing.assert_allclose(feature_mesh.vertices, tsdf_mesh.vertices, atol=1e-6)


class TestSnapshot:
    """Test the FVL1 debug snapshot"""

    def test_snapshot_layout(self, pixel_camera):
        volume = FeatureVolume(origin=(0.0, 0.0, 1.0), voxel_size=0.04, dims=(2, 1, 1),
                               channels=2)
        volume.backproject_integrate(constant_features(pixel_camera, [0.5, -0.25]),
                                     Pose.identity(), pixel_camera)
        blob = volume.snapshot()
        assert blob[:4] == b'FVL1'
        assert len(blob) == 36 + 4 * 3 * volume.num_voxels
        loaded = FeatureVolume.from_snapshot(blob)
        assert loaded.channels == 2
        assert loaded.state_equals(volume)
