"""
Tests for rigid transforms, projection and depth images.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from models.geometry import (
    DepthImage, GeometryError, Intrinsics, Pose, backproject, backproject_depth, compose,
    interpolate_toward, inverse, look_at, project, rotation_angle, translation_distance,
)


@pytest.fixture
def camera():
    """Camera with fx=fy=100 and principal point (50, 50)"""
    return Intrinsics(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=201, height=101)


def random_pose(rng: np.random.Generator) -> Pose:
    rotation = Rotation.from_rotvec(rng.normal(size=3)).as_matrix()
    return Pose(rotation, rng.uniform(-2.0, 2.0, size=3))


class TestPose:
    """Test Pose construction and group operations"""

    def test_identity_is_neutral(self):
        pose = compose(Pose.translate(1, 2, 3), Pose.rot_z(30))
        assert compose(Pose.identity(), pose) == pose

    def test_compose_with_inverse(self):
        pose = compose(Pose.translate(0.3, -1.2, 2.0), Pose.rot_x(40))
        result = compose(pose, inverse(pose))
        assert np.allclose(result.to_matrix(), np.eye(4), atol=1e-9)

    def test_pure_translations_add(self):
        result = compose(Pose.translate(1, 0, 0), Pose.translate(0, 2, 0))
        assert np.allclose(result.translation, [1, 2, 0])
        assert np.array_equal(result.rotation, np.eye(3))

    def test_inverse_examples(self):
        assert inverse(Pose.identity()) == Pose.identity()
        assert np.allclose(inverse(Pose.translate(1, 2, 3)).translation, [-1, -2, -3])
        assert np.allclose(inverse(Pose.rot_z(90)).rotation, Pose.rot_z(-90).rotation, atol=1e-12)

    def test_random_pairs_compose_to_self(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            a, b = random_pose(rng), random_pose(rng)
            result = compose(a, compose(b, inverse(b)))
            assert np.allclose(result.to_matrix(), a.to_matrix(), atol=1e-9, rtol=0)

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(GeometryError):
            Pose(np.diag([1.0, 1.0, 1.001]), np.zeros(3))
        with pytest.raises(GeometryError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_matrix_serialization(self):
        pose = compose(Pose.translate(0.5, 0.25, -1.0), Pose.rot_y(20))
        assert Pose.from_list(pose.to_list()) == pose
        with pytest.raises(GeometryError):
            Pose.from_list([1.0] * 15)
        bad = pose.to_matrix()
        bad[3, 0] = 0.5
        with pytest.raises(GeometryError):
            Pose.from_matrix(bad)

    def test_pose_is_immutable(self):
        pose = Pose.translate(1, 2, 3)
        with pytest.raises(ValueError):
            pose.translation[0] = 5.0


class TestDistances:
    """Test translation and rotation distance measures"""

    def test_translation_distance_examples(self):
        assert translation_distance(Pose.identity(), Pose.identity()) == 0.0
        assert translation_distance(Pose.identity(), Pose.translate(0.1, 0, 0)) == pytest.approx(0.1)
        assert translation_distance(Pose.translate(1, 1, 0),
                                    Pose.translate(1, 1, 0.45)) == pytest.approx(0.45)

    def test_rotation_angle_examples(self):
        assert rotation_angle(Pose.identity(), Pose.identity()) == 0.0
        assert rotation_angle(Pose.identity(), Pose.rot_z(15)) == pytest.approx(15.0, abs=1e-9)
        assert rotation_angle(Pose.rot_x(10), Pose.rot_x(-10)) == pytest.approx(20.0, abs=1e-9)

    def test_rotation_angle_range(self):
        assert rotation_angle(Pose.identity(), Pose.rot_y(180)) == pytest.approx(180.0, abs=1e-6)
        assert rotation_angle(Pose.identity(), Pose.rot_y(270)) == pytest.approx(90.0, abs=1e-9)

    def test_rotation_angle_is_symmetric(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            a, b = random_pose(rng), random_pose(rng)
            assert rotation_angle(a, b) == rotation_angle(b, a)


class TestProjection:
    """Test pinhole projection and back-projection"""

    def test_optical_axis(self, camera):
        assert project([0, 0, 1], Pose.identity(), camera) == pytest.approx((50.0, 50.0, 1.0))

    def test_off_axis_point(self, camera):
        assert project([0.5, 0, 1], Pose.identity(), camera) == pytest.approx((100.0, 50.0, 1.0))

    def test_behind_camera(self, camera):
        assert project([0, 0, -1], Pose.identity(), camera) is None

    def test_outside_image(self, camera):
        # u = 100 * 2 / 1 + 50 = 250 > width
        assert project([2.0, 0, 1], Pose.identity(), camera) is None

    def test_round_trip(self, camera):
        rng = np.random.default_rng(3)
        for _ in range(100):
            target = rng.uniform(-1, 1, size=3)
            cam_pose = look_at(target + rng.uniform(1.0, 2.0) * rng.normal(size=3), target)
            point = target + rng.uniform(-0.1, 0.1, size=3)
            projected = project(point, inverse(cam_pose), camera)
            if projected is None:
                continue
            u, v, z = projected
            assert np.allclose(backproject(u, v, z, cam_pose, camera), point, atol=1e-6)

    def test_look_at_centres_target(self, camera):
        cam_pose = look_at([2.0, 0.0, 1.5], [0.0, 0.0, 0.5])
        u, v, z = project([0.0, 0.0, 0.5], inverse(cam_pose), camera)
        assert (u, v) == pytest.approx((50.0, 50.0), abs=1e-9)
        assert z == pytest.approx(np.sqrt(4.0 + 1.0))
        # image "down" has a negative world z component when the up vector is +z
        assert cam_pose.rotation[2, 1] < 0


class TestInterpolation:
    """Test pose interpolation used by loop closures"""

    def test_fraction_limits(self):
        current, target = Pose.translate(1, 0, 0), compose(Pose.translate(0, 1, 0), Pose.rot_z(30))
        assert interpolate_toward(current, target, 0.0) is current
        assert interpolate_toward(current, target, 1.0) is target

    def test_half_way(self):
        current, target = Pose.identity(), compose(Pose.translate(2, 0, 0), Pose.rot_z(40))
        half = interpolate_toward(current, target, 0.5)
        assert np.allclose(half.translation, [1, 0, 0])
        assert rotation_angle(current, half) == pytest.approx(20.0, abs=1e-6)


class TestIntrinsicsAndDepth:
    """Test camera and depth image invariants"""

    def test_invalid_intrinsics(self):
        with pytest.raises(GeometryError):
            Intrinsics(fx=0.0, fy=100.0, cx=5, cy=5, width=10, height=10)
        with pytest.raises(GeometryError):
            Intrinsics(fx=100.0, fy=100.0, cx=10, cy=5, width=10, height=10)

    def test_depth_size_checked(self):
        with pytest.raises(GeometryError):
            DepthImage(width=4, height=3, data=np.ones(11))

    def test_valid_mask(self):
        depth = DepthImage.from_array(np.array([[1.0, 0.0], [-2.0, np.nan]]))
        assert depth.valid_mask().tolist() == [[True, False], [False, False]]

    def test_backproject_depth(self, camera):
        data = np.zeros((camera.height, camera.width), dtype=np.float32)
        data[50, 50] = 2.0
        points = backproject_depth(DepthImage.from_array(data), Pose.translate(0, 0, 1), camera)
        assert points.shape == (1, 3)
        assert np.allclose(points[0], [0.0, 0.0, 3.0])
