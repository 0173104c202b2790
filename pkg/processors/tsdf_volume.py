"""
Truncated signed distance volume with exact-inverse integration.

Each voxel stores (weighted_sum_tsdf, weight_sum). Integration adds a clamped,
normalized projective distance with weight 1; de-integration subtracts the
same quantities, restoring the previous state bit for bit.
"""
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from models.geometry import DepthImage, Intrinsics, Pose
from .base import VoxelVolume, VolumeConfigError, check_sign, quantize


def tsdf_samples(depth_values: np.ndarray, voxel_z: np.ndarray,
                 truncation: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Projective TSDF samples for voxels seeing the given depths.

    Returns:
        (samples, keep): quantized clamp(sdf / truncation, -1, 1) and the mask
        of voxels that receive an update (valid depth, sdf > -truncation)
    """
    depth_values = np.asarray(depth_values, dtype=np.float64)
    with np.errstate(invalid='ignore'):
        sdf = depth_values - voxel_z
        keep = np.isfinite(depth_values) & (depth_values > 0) & (sdf > -truncation)
    samples = quantize(np.clip(np.where(keep, sdf, 0.0) / truncation, -1.0, 1.0))
    return samples, keep


class TsdfVolume(VoxelVolume):
    """Dense TSDF grid storing weighted sums rather than running means."""

    MAGIC = b'TSD1'

    def __init__(self, origin: Sequence[float], voxel_size: float, dims: Sequence[int],
                 truncation: Optional[float] = None):
        """
        Args:
            origin: World position of voxel (0, 0, 0)
            voxel_size: Voxel edge length, meters
            dims: Voxel counts along x, y, z
            truncation: Truncation distance tau, defaults to 3 voxels
        """
        super().__init__(origin, voxel_size, dims)
        self.truncation = float(truncation) if truncation else 3.0 * self.voxel_size
        self.weighted_sum = np.zeros(self.dims, dtype=np.float64)
        self.weight_sum = np.zeros(self.dims, dtype=np.float64)

    @classmethod
    def from_sdf_grid(cls, origin: Sequence[float], voxel_size: float, sdf: np.ndarray,
                      truncation: Optional[float] = None) -> 'TsdfVolume':
        """Seed a volume with one unit-weight observation of a sampled SDF."""
        sdf = np.asarray(sdf, dtype=np.float64)
        volume = cls(origin, voxel_size, sdf.shape, truncation)
        volume.weighted_sum[...] = quantize(np.clip(sdf / volume.truncation, -1.0, 1.0))
        volume.weight_sum[...] = 1.0
        return volume

    def integrate_depth(self, depth: DepthImage, cam_pose: Pose, k: Intrinsics,
                        sign: int = 1) -> 'TsdfVolume':
        """
        Fuse (sign = +1) or remove (sign = -1) one depth map.

        Raises:
            ProtocolViolationError: If removal drives any weight below -1e-6;
                the volume is left unchanged in that case
        """
        check_sign(sign)
        if (depth.width, depth.height) != (k.width, k.height):
            raise VolumeConfigError(
                f"Depth image is {depth.width}x{depth.height}, camera is {k.width}x{k.height}")
        projected = self.project_voxels(cam_pose, k)
        depth_values = depth.data[projected.rows, projected.cols]
        samples, keep = tsdf_samples(depth_values, projected.z, self.truncation)
        index = projected.flat_index[keep]

        weights = self.weight_sum.reshape(-1)
        sums = self.weighted_sum.reshape(-1)
        new_weights = weights[index] + sign
        if sign < 0:
            self.check_weights(new_weights, index)
        weights[index] = new_weights
        sums[index] = sums[index] + sign * samples[keep]
        return self

    def integrate_observation(self, payload: DepthImage, cam_pose: Pose, k: Intrinsics,
                              sign: int) -> None:
        self.integrate_depth(payload, cam_pose, k, sign)

    def tsdf(self) -> np.ndarray:
        """Exposed TSDF (weighted mean); NaN where nothing is integrated."""
        values = np.full(self.dims, np.nan)
        np.divide(self.weighted_sum, self.weight_sum, out=values, where=self.weight_sum > 0)
        return values

    def surface_field(self) -> Tuple[np.ndarray, np.ndarray]:
        observed = self.weight_sum > 0
        return np.where(observed, self.tsdf(), 1.0), observed

    def total_weight(self) -> float:
        return float(self.weight_sum.sum())

    def state_equals(self, other: 'TsdfVolume') -> bool:
        """Bitwise equality of the accumulated state."""
        return (np.array_equal(self.weighted_sum, other.weighted_sum) and
                np.array_equal(self.weight_sum, other.weight_sum))

    def copy(self) -> 'TsdfVolume':
        clone = TsdfVolume(self.origin, self.voxel_size, self.dims, self.truncation)
        clone.weighted_sum = self.weighted_sum.copy()
        clone.weight_sum = self.weight_sum.copy()
        clone._centers = self._centers
        return clone

    def clear(self) -> None:
        self.weighted_sum[...] = 0.0
        self.weight_sum[...] = 0.0

    def snapshot(self) -> bytes:
        """TSD1 debug snapshot: header, then (weighted_sum, weight_sum) f32 pairs, x fastest."""
        pairs = np.stack([self._x_fastest(self.weighted_sum),
                          self._x_fastest(self.weight_sum)], axis=-1)
        return self._snapshot_header() + pairs.astype('<f4').tobytes()

    def save_snapshot(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.snapshot())

    @classmethod
    def from_snapshot(cls, blob: bytes, truncation: Optional[float] = None) -> 'TsdfVolume':
        dims, origin, voxel_size, offset = cls._parse_snapshot_header(blob)
        volume = cls(origin, voxel_size, dims, truncation)
        pairs = np.frombuffer(blob, dtype='<f4', offset=offset)
        if pairs.size != 2 * volume.num_voxels:
            raise VolumeConfigError("Snapshot payload does not match its dimensions")
        pairs = pairs.reshape(dims[2], dims[1], dims[0], 2).astype(np.float64)
        volume.weighted_sum = np.ascontiguousarray(np.swapaxes(pairs[..., 0], 0, 2))
        volume.weight_sum = np.ascontiguousarray(np.swapaxes(pairs[..., 1], 0, 2))
        return volume
