"""
Rigid-body transforms, the pinhole camera model and depth images.

Poses are world-from-camera transforms (the camera pose). Cameras follow the
OpenCV convention: x right, y down, z forward. Pixel centres sit at integer
coordinates, so the nearest pixel of a projection (u, v) is
floor(u + 0.5), floor(v + 0.5).
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

ORTHONORMAL_TOLERANCE = 1e-9


class GeometryError(ValueError):
    """Raised when a pose, camera or image violates its invariants."""
    pass


def _frozen_array(values, shape: Tuple[int, ...], dtype=np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype).reshape(shape)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Pose:
    """
    Rigid transform in SE(3): x -> rotation @ x + translation.

    Instances are immutable; equality is bitwise on both components.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        """Freeze the arrays and check orthonormality."""
        rotation = _frozen_array(self.rotation, (3, 3))
        translation = _frozen_array(self.translation, (3,))
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise GeometryError("Pose contains non-finite values")
        gram_error = np.abs(rotation.T @ rotation - np.eye(3)).max()
        det_error = abs(np.linalg.det(rotation) - 1.0)
        if gram_error > ORTHONORMAL_TOLERANCE or det_error > ORTHONORMAL_TOLERANCE:
            raise GeometryError(
                f"Rotation is not orthonormal (gram error {gram_error:.2e}, "
                f"det error {det_error:.2e})"
            )
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return (np.array_equal(self.rotation, other.rotation) and
                np.array_equal(self.translation, other.translation))

    def __hash__(self) -> int:
        return hash((self.rotation.tobytes(), self.translation.tobytes()))

    def __repr__(self) -> str:
        return f"Pose(t={self.translation.tolist()}, R={self.rotation.tolist()})"

    @classmethod
    def identity(cls) -> 'Pose':
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def translate(cls, x: float, y: float, z: float) -> 'Pose':
        return cls(np.eye(3), [x, y, z])

    @classmethod
    def rot_x(cls, degrees: float) -> 'Pose':
        return cls(Rotation.from_euler('x', degrees, degrees=True).as_matrix(), np.zeros(3))

    @classmethod
    def rot_y(cls, degrees: float) -> 'Pose':
        return cls(Rotation.from_euler('y', degrees, degrees=True).as_matrix(), np.zeros(3))

    @classmethod
    def rot_z(cls, degrees: float) -> 'Pose':
        return cls(Rotation.from_euler('z', degrees, degrees=True).as_matrix(), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix) -> 'Pose':
        """
        Build a pose from a 4x4 homogeneous matrix.

        Raises:
            GeometryError: If the matrix is not a rigid transform
        """
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise GeometryError(f"Expected a 4x4 matrix, got shape {matrix.shape}")
        if not np.array_equal(matrix[3], [0.0, 0.0, 0.0, 1.0]):
            raise GeometryError("Last row of a pose matrix must be [0, 0, 0, 1]")
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def from_list(cls, values: Sequence[float]) -> 'Pose':
        """Build a pose from 16 row-major floats."""
        if len(values) != 16:
            raise GeometryError(f"Expected 16 pose values, got {len(values)}")
        return cls.from_matrix(np.asarray(values, dtype=np.float64).reshape(4, 4))

    def to_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def to_list(self) -> List[float]:
        """Row-major 16 floats, the serialized form used by stream files."""
        return [float(value) for value in self.to_matrix().ravel()]

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array (or a single 3-vector) of points."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation


def compose(a: Pose, b: Pose) -> Pose:
    """Return the pose mapping x -> a(b(x))."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(p: Pose) -> Pose:
    rotation_t = p.rotation.T
    return Pose(rotation_t, -(rotation_t @ p.translation))


def translation_distance(a: Pose, b: Pose) -> float:
    """Euclidean distance between the two translations, in meters."""
    return float(np.linalg.norm(a.translation - b.translation))


def rotation_angle(a: Pose, b: Pose) -> float:
    """
    Geodesic angle of the relative rotation between two poses, in degrees.

    Symmetric bit for bit: swapping the arguments transposes the relative
    rotation, which leaves the trace and the norm of its skew part unchanged.
    """
    relative = np.einsum('ki,kj->ij', a.rotation, b.rotation)
    cos_term = np.trace(relative) - 1.0
    skew = np.array([
        relative[2, 1] - relative[1, 2],
        relative[0, 2] - relative[2, 0],
        relative[1, 0] - relative[0, 1],
    ])
    sin_term = np.linalg.norm(skew)
    return float(np.degrees(np.arctan2(sin_term, cos_term)))


def interpolate_toward(current: Pose, target: Pose, fraction: float) -> Pose:
    """
    Move a pose toward a target by a fraction of the way.

    Rotation follows the geodesic (slerp); the position moves along the
    straight line, so the translation error shrinks by (1 - fraction).
    """
    if fraction <= 0.0:
        return current
    if fraction >= 1.0:
        return target
    rotations = Rotation.from_matrix(np.stack([current.rotation, target.rotation]))
    rotation = Slerp([0.0, 1.0], rotations)([fraction]).as_matrix()[0]
    position = current.translation + fraction * (target.translation - current.translation)
    return Pose(rotation, position)


def look_at(eye: Sequence[float], target: Sequence[float],
            up: Sequence[float] = (0.0, 0.0, 1.0)) -> Pose:
    """
    Camera pose at `eye` whose optical axis points at `target`.

    Falls back to the world y axis as "up" when the view direction is
    parallel to `up`.
    """
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return Pose(np.column_stack([right, down, forward]), eye)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("Focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("Image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("Principal point must lie inside the image")

    def to_dict(self) -> dict:
        return {'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy,
                'width': self.width, 'height': self.height}


@dataclass(frozen=True, eq=False)
class DepthImage:
    """
    Row-major depth map in meters, stored as a (height, width) float32 array.

    Values <= 0 or non-finite are invalid.
    """

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.size != self.width * self.height:
            raise GeometryError(
                f"Depth data has {data.size} values, expected {self.width * self.height}"
            )
        data = data.reshape(self.height, self.width).copy()
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_array(cls, array: np.ndarray) -> 'DepthImage':
        array = np.asarray(array, dtype=np.float32)
        return cls(width=array.shape[1], height=array.shape[0], data=array)

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.data) & (self.data > 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DepthImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def project_points(points_world: np.ndarray, cam_from_world: Pose,
                   k: Intrinsics) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized pinhole projection.

    Returns:
        Tuple of (u, v, z, in_view) arrays; u and v are undefined where
        in_view is False
    """
    points_cam = cam_from_world.apply(points_world)
    z = points_cam[:, 2]
    in_front = z > 0
    safe_z = np.where(in_front, z, 1.0)
    u = k.fx * points_cam[:, 0] / safe_z + k.cx
    v = k.fy * points_cam[:, 1] / safe_z + k.cy
    col = np.floor(u + 0.5)
    row = np.floor(v + 0.5)
    in_view = in_front & (col >= 0) & (col < k.width) & (row >= 0) & (row < k.height)
    return u, v, z, in_view


def project(point_world: Sequence[float], cam_from_world: Pose,
            k: Intrinsics) -> Optional[Tuple[float, float, float]]:
    """
    Project a world point into the image.

    Returns:
        (u, v, z) in pixels and meters, or None when the point is out of view
    """
    u, v, z, in_view = project_points(np.asarray(point_world, dtype=np.float64).reshape(1, 3),
                                      cam_from_world, k)
    if not in_view[0]:
        return None
    return float(u[0]), float(v[0]), float(z[0])


def backproject(u: float, v: float, z: float, cam_pose: Pose, k: Intrinsics) -> np.ndarray:
    """Inverse of project: pixel (u, v) at camera depth z to a world point."""
    point_cam = np.array([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z])
    return cam_pose.apply(point_cam)


def pixel_rays(k: Intrinsics) -> np.ndarray:
    """Camera-frame ray directions with unit z, shape (height, width, 3)."""
    cols, rows = np.meshgrid(np.arange(k.width, dtype=np.float64),
                             np.arange(k.height, dtype=np.float64))
    return np.stack([(cols - k.cx) / k.fx, (rows - k.cy) / k.fy, np.ones_like(cols)], axis=-1)


def backproject_depth(depth: DepthImage, cam_pose: Pose, k: Intrinsics) -> np.ndarray:
    """World points of every valid depth pixel, shape (N, 3)."""
    mask = depth.valid_mask()
    rays = pixel_rays(k)[mask]
    points_cam = rays * depth.data[mask].astype(np.float64)[:, None]
    return cam_pose.apply(points_cam)
