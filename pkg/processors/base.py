"""
Base voxel volume providing the integrate / de-integrate contract shared by
the reconstruction representations.

Every sample added to a volume is rounded to a multiple of 2^-24 and
accumulated in float64. Sums of such values are exact, so de-integration
(sign = -1) subtracts precisely what integration added, in any order.
"""

import struct
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

import numpy as np
from loguru import logger
from skimage import measure

from models.geometry import Intrinsics, Pose, inverse, project_points
from models.mesh import TriangleMesh

FIXED_POINT_SCALE = 2.0 ** 24
WEIGHT_TOLERANCE = 1e-6


class ReconstructionError(Exception):
    """Base exception for reconstruction errors."""
    pass


class ProtocolViolationError(ReconstructionError):
    """Raised when de-integration removes something that was never integrated."""

    def __init__(self, message: str, voxel: Tuple[int, int, int] = None):
        self.voxel = voxel
        super().__init__(f"{message} at voxel {voxel}" if voxel is not None else message)


class VolumeConfigError(ReconstructionError):
    """Raised for invalid grid geometry or mismatched snapshots."""
    pass


def quantize(values: np.ndarray) -> np.ndarray:
    """Round to the fixed-point grid used for exact accumulation."""
    return np.round(np.asarray(values, dtype=np.float64) * FIXED_POINT_SCALE) / FIXED_POINT_SCALE


def check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return sign


@dataclass
class ProjectedVoxels:
    """Voxels inside a camera frustum and the pixel each one projects to."""

    flat_index: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    z: np.ndarray


class VoxelVolume(ABC):
    """
    Abstract dense voxel grid with fixed bounds.

    Voxel (i, j, k) has its centre at origin + (i, j, k) * voxel_size; arrays
    are indexed [i, j, k] with i along world x.
    """

    MAGIC = b''

    def __init__(self, origin: Sequence[float], voxel_size: float, dims: Sequence[int]):
        """
        Initialize the grid geometry.

        Args:
            origin: World position of voxel (0, 0, 0), meters
            voxel_size: Edge length of a voxel, meters
            dims: Number of voxels along x, y and z
        """
        if voxel_size <= 0:
            raise VolumeConfigError("voxel_size must be positive")
        if len(dims) != 3 or any(int(n) <= 0 for n in dims):
            raise VolumeConfigError(f"dims must be three positive integers, got {dims}")
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3)
        self.voxel_size = float(voxel_size)
        self.dims = tuple(int(n) for n in dims)
        self._centers = None

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]], voxel_size: float, **kwargs):
        """Create a volume covering an axis-aligned box given as (min, max) corners."""
        low = np.asarray(bounds[0], dtype=np.float64)
        high = np.asarray(bounds[1], dtype=np.float64)
        dims = np.floor((high - low) / voxel_size + 1e-9).astype(int) + 1
        return cls(origin=low, voxel_size=voxel_size, dims=tuple(dims), **kwargs)

    @property
    def num_voxels(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def voxel_centers(self) -> np.ndarray:
        """World coordinates of all voxel centres in flat (C) order, shape (N, 3)."""
        if self._centers is None:
            grid = np.indices(self.dims, dtype=np.float64).reshape(3, -1).T
            self._centers = self.origin + grid * self.voxel_size
            self._centers.setflags(write=False)
        return self._centers

    def project_voxels(self, cam_pose: Pose, k: Intrinsics) -> ProjectedVoxels:
        """Find voxels in front of the camera whose nearest pixel lies in the image."""
        u, v, z, in_view = project_points(self.voxel_centers(), inverse(cam_pose), k)
        flat_index = np.flatnonzero(in_view)
        return ProjectedVoxels(
            flat_index=flat_index,
            rows=np.floor(v[flat_index] + 0.5).astype(np.intp),
            cols=np.floor(u[flat_index] + 0.5).astype(np.intp),
            z=z[flat_index],
        )

    def check_weights(self, new_weights: np.ndarray, flat_index: np.ndarray) -> None:
        """
        Raises:
            ProtocolViolationError: If any weight would drop below -1e-6
        """
        negative = new_weights < -WEIGHT_TOLERANCE
        if np.any(negative):
            first = flat_index[np.argmax(negative)]
            voxel = tuple(int(i) for i in np.unravel_index(first, self.dims))
            raise ProtocolViolationError("De-integration drove the weight negative", voxel)

    def integrate_bundle(self, payloads: Mapping[int, object], poses: Mapping[int, Pose],
                         k: Intrinsics, sign: int) -> None:
        """Apply integrate_observation for every frame of a bundle, in frame order."""
        for frame_id in poses:
            self.integrate_observation(payloads[frame_id], poses[frame_id], k, sign)

    @abstractmethod
    def integrate_observation(self, payload, cam_pose: Pose, k: Intrinsics, sign: int) -> None:
        """Integrate (sign = +1) or de-integrate (sign = -1) one observation."""
        pass

    @abstractmethod
    def surface_field(self) -> Tuple[np.ndarray, np.ndarray]:
        """Return (signed field, observed mask) used for isosurface extraction."""
        pass

    @abstractmethod
    def copy(self) -> 'VoxelVolume':
        pass

    @abstractmethod
    def clear(self) -> None:
        """Reset every voxel to the unobserved state."""
        pass

    def extract_mesh(self) -> TriangleMesh:
        """
        Marching-cubes isosurface at level 0.

        Cubes with any unobserved corner are skipped; unobserved voxels are
        never read.
        """
        values, observed = self.surface_field()
        if min(self.dims) < 2 or not observed.any():
            return TriangleMesh.empty()
        cells = observed[:-1, :-1, :-1].copy()
        for dx, dy, dz in ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0),
                           (1, 0, 1), (0, 1, 1), (1, 1, 1)):
            cells &= observed[dx:self.dims[0] - 1 + dx,
                              dy:self.dims[1] - 1 + dy,
                              dz:self.dims[2] - 1 + dz]
        if not cells.any():
            return TriangleMesh.empty()
        # skimage keys each cube on the mask at its far corner (x+1, y+1, z+1)
        mask = np.zeros(self.dims, dtype=bool)
        mask[1:, 1:, 1:] = cells
        field = np.where(observed, values, 1.0)
        if not (field[observed].min() < 0.0 < field[observed].max()):
            return TriangleMesh.empty()
        try:
            vertices, faces, _, _ = measure.marching_cubes(
                field, level=0.0, spacing=(self.voxel_size,) * 3,
                method='lorensen', allow_degenerate=False, mask=mask)
        except (ValueError, RuntimeError) as e:
            logger.debug(f"No isosurface extracted: {e}")
            return TriangleMesh.empty()
        vertices, faces = self._drop_unobserved_faces(vertices, faces, observed)
        if len(faces) == 0:
            return TriangleMesh.empty()
        return TriangleMesh(vertices + self.origin, faces)

    def _drop_unobserved_faces(self, vertices: np.ndarray, faces: np.ndarray,
                               observed: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Keep faces whose vertices all lie on edges between two observed voxels."""
        grid = vertices / self.voxel_size
        low = np.floor(grid + 1e-6).astype(np.intp)
        high = np.maximum(low, np.ceil(grid - 1e-6).astype(np.intp))
        upper = np.asarray(self.dims) - 1
        low = np.clip(low, 0, upper)
        high = np.clip(high, 0, upper)
        vertex_ok = observed[tuple(low.T)] & observed[tuple(high.T)]
        keep = vertex_ok[faces].all(axis=1)
        if keep.all():
            return vertices, faces
        faces = faces[keep]
        used = np.unique(faces)
        remap = np.full(len(vertices), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return vertices[used], remap[faces]

    def _snapshot_header(self) -> bytes:
        return (self.MAGIC + struct.pack('<3I', *self.dims) +
                struct.pack('<3f', *self.origin) + struct.pack('<f', self.voxel_size))

    @classmethod
    def _parse_snapshot_header(cls, blob: bytes) -> Tuple[Tuple[int, int, int], np.ndarray, float, int]:
        if blob[:4] != cls.MAGIC:
            raise VolumeConfigError(f"Bad snapshot magic {blob[:4]!r}, expected {cls.MAGIC!r}")
        dims = struct.unpack_from('<3I', blob, 4)
        origin = np.array(struct.unpack_from('<3f', blob, 16), dtype=np.float64)
        voxel_size = struct.unpack_from('<f', blob, 28)[0]
        return dims, origin, voxel_size, 32

    @staticmethod
    def _x_fastest(array: np.ndarray) -> np.ndarray:
        """Reorder an [i, j, k, ...] array so that i varies fastest when flattened."""
        return np.ascontiguousarray(np.swapaxes(array, 0, 2))
