"""
Linear feature volume: features densely back-projected into voxels and
fused by running average, with exact linear de-integration.
"""
import struct
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from models.feature_map import FeatureMap
from models.geometry import Intrinsics, Pose
from .base import VoxelVolume, VolumeConfigError, check_sign, quantize
from .tsdf_volume import tsdf_samples

# (features (N, F), voxel camera depth (N,)) -> (values (N, F'), keep mask (N,))
SampleHead = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


class TsdfProjectionHead:
    """
    Turns identity-depth features into per-voxel TSDF samples under the TSDF
    visibility rule, so a one-channel feature volume reproduces TsdfVolume.
    """

    def __init__(self, truncation: float):
        self.truncation = float(truncation)

    def __call__(self, features: np.ndarray, voxel_z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        samples, keep = tsdf_samples(features[:, 0], voxel_z, self.truncation)
        return samples[:, None], keep


class FeatureVolume(VoxelVolume):
    """Per-voxel feature sums and observation counts."""

    MAGIC = b'FVL1'

    def __init__(self, origin: Sequence[float], voxel_size: float, dims: Sequence[int],
                 channels: int, head: Optional[SampleHead] = None):
        """
        Args:
            origin: World position of voxel (0, 0, 0)
            voxel_size: Voxel edge length, meters
            dims: Voxel counts along x, y, z
            channels: Feature channels stored per voxel
            head: Optional per-voxel transform applied at back-projection
        """
        super().__init__(origin, voxel_size, dims)
        if channels <= 0:
            raise VolumeConfigError("channels must be positive")
        self.channels = int(channels)
        self.head = head
        self.feature_sum = np.zeros(self.dims + (self.channels,), dtype=np.float64)
        self.count = np.zeros(self.dims, dtype=np.float64)

    def backproject_integrate(self, fmap: FeatureMap, cam_pose: Pose, k: Intrinsics,
                              sign: int = 1) -> 'FeatureVolume':
        """
        Add (sign = +1) or remove (sign = -1) one view's features.

        Every voxel in the frustum samples the feature at its nearest pixel.

        Raises:
            ProtocolViolationError: If removal drives any count below -1e-6;
                the volume is left unchanged in that case
        """
        check_sign(sign)
        if (fmap.width, fmap.height) != (k.width, k.height):
            raise VolumeConfigError(
                f"Feature map is {fmap.width}x{fmap.height}, camera is {k.width}x{k.height}")
        projected = self.project_voxels(cam_pose, k)
        features = fmap.data[projected.rows, projected.cols]
        if self.head is not None:
            values, keep = self.head(features, projected.z)
        else:
            values, keep = quantize(features), np.ones(len(features), dtype=bool)
        if values.shape[1] != self.channels:
            raise VolumeConfigError(
                f"Got {values.shape[1]} feature channels, volume stores {self.channels}")
        index = projected.flat_index[keep]

        counts = self.count.reshape(-1)
        sums = self.feature_sum.reshape(-1, self.channels)
        new_counts = counts[index] + sign
        if sign < 0:
            self.check_weights(new_counts, index)
        counts[index] = new_counts
        sums[index] = sums[index] + sign * values[keep]
        return self

    def integrate_observation(self, payload: FeatureMap, cam_pose: Pose, k: Intrinsics,
                              sign: int) -> None:
        self.backproject_integrate(payload, cam_pose, k, sign)

    def features(self) -> np.ndarray:
        """Exposed running-average features; NaN where the count is zero."""
        values = np.full(self.feature_sum.shape, np.nan)
        np.divide(self.feature_sum, self.count[..., None], out=values,
                  where=self.count[..., None] > 0)
        return values

    def surface_field(self) -> Tuple[np.ndarray, np.ndarray]:
        observed = self.count > 0
        return np.where(observed, self.features()[..., 0], 1.0), observed

    def state_equals(self, other: 'FeatureVolume') -> bool:
        return (np.array_equal(self.feature_sum, other.feature_sum) and
                np.array_equal(self.count, other.count))

    def copy(self) -> 'FeatureVolume':
        clone = FeatureVolume(self.origin, self.voxel_size, self.dims, self.channels, self.head)
        clone.feature_sum = self.feature_sum.copy()
        clone.count = self.count.copy()
        clone._centers = self._centers
        return clone

    def clear(self) -> None:
        self.feature_sum[...] = 0.0
        self.count[...] = 0.0

    def snapshot(self) -> bytes:
        """FVL1 debug snapshot: TSD1-style header, u32 channels, then per voxel F sums and count."""
        rows = np.concatenate([self._x_fastest(self.feature_sum),
                               self._x_fastest(self.count)[..., None]], axis=-1)
        return (self._snapshot_header() + struct.pack('<I', self.channels) +
                rows.astype('<f4').tobytes())

    def save_snapshot(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.snapshot())

    @classmethod
    def from_snapshot(cls, blob: bytes) -> 'FeatureVolume':
        dims, origin, voxel_size, offset = cls._parse_snapshot_header(blob)
        channels = struct.unpack_from('<I', blob, offset)[0]
        volume = cls(origin, voxel_size, dims, channels)
        rows = np.frombuffer(blob, dtype='<f4', offset=offset + 4)
        if rows.size != volume.num_voxels * (channels + 1):
            raise VolumeConfigError("Snapshot payload does not match its dimensions")
        rows = np.swapaxes(rows.reshape(dims[2], dims[1], dims[0], channels + 1), 0, 2)
        volume.feature_sum = np.ascontiguousarray(rows[..., :channels], dtype=np.float64)
        volume.count = np.ascontiguousarray(rows[..., channels], dtype=np.float64)
        return volume
