"""
Reconstruction quality assessment.

Builds the time-dependent ground truth (all depths up to t fused with the
pose estimates current at t) and compares meshes with sampled accuracy,
completeness, chamfer distance, precision, recall and F-score.
"""
from dataclasses import asdict, dataclass
from typing import Dict, Mapping, Optional

import numpy as np
import trimesh
from loguru import logger
from sklearn.neighbors import KDTree

from config import settings
from models.experiment_config import ExperimentConfig
from models.geometry import DepthImage, Intrinsics, Pose
from models.mesh import TriangleMesh
from processors.tsdf_volume import TsdfVolume

PRED_SAMPLE_SEED = 0
GT_SAMPLE_SEED = 1


@dataclass
class MetricsReport:
    """Reconstruction metrics for one checkpoint; distances in meters."""
    accuracy: float
    completeness: float
    chamfer: float
    precision: float
    recall: float
    fscore: float

    @classmethod
    def from_components(cls, accuracy: float, completeness: float,
                        precision: float, recall: float) -> 'MetricsReport':
        denominator = precision + recall
        fscore = 2.0 * precision * recall / denominator if denominator > 0 else 0.0
        return cls(accuracy=accuracy, completeness=completeness,
                   chamfer=(accuracy + completeness) / 2.0,
                   precision=precision, recall=recall, fscore=fscore)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class Checkpoint:
    """Predicted and ground-truth meshes extracted at the same tick."""
    time: int
    predicted_mesh: TriangleMesh
    ground_truth_mesh: TriangleMesh


def point_sample(mesh: TriangleMesh, n: int, seed: int) -> np.ndarray:
    """Sample n points uniformly by area; empty mesh gives an empty (0, 3) array."""
    if mesh.is_empty or n <= 0:
        return np.zeros((0, 3))
    points, _ = trimesh.sample.sample_surface(mesh.to_trimesh(), int(n), seed=seed)
    return np.asarray(points, dtype=np.float64)


def nearest_distances(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Distance from every source point to its nearest target point."""
    distances, _ = KDTree(target).query(source)
    return distances.reshape(-1)


def evaluate(pred: TriangleMesh, gt: TriangleMesh,
             inlier_threshold: float = settings.INLIER_THRESHOLD,
             n_samples: int = settings.SAMPLE_COUNT,
             clip_distance: float = settings.CLIP_DISTANCE,
             seed: int = PRED_SAMPLE_SEED,
             gt_seed: int = GT_SAMPLE_SEED) -> Optional[MetricsReport]:
    """
    Compare a predicted mesh with a ground-truth mesh.

    Inliers are strictly closer than inlier_threshold; distances are clipped
    at clip_distance. Swapping pred/gt together with seed/gt_seed swaps
    accuracy and completeness exactly.

    Returns:
        MetricsReport, or None when the ground truth is empty. An empty
        prediction scores worst case: accuracy = completeness = clip
        distance, precision = recall = 0.
    """
    if gt.is_empty:
        return None
    if pred.is_empty:
        return MetricsReport.from_components(clip_distance, clip_distance, 0.0, 0.0)

    pred_points = point_sample(pred, n_samples, seed)
    gt_points = point_sample(gt, n_samples, gt_seed)
    dist_pred = np.minimum(nearest_distances(pred_points, gt_points), clip_distance)
    dist_gt = np.minimum(nearest_distances(gt_points, pred_points), clip_distance)

    return MetricsReport.from_components(
        accuracy=float(np.mean(dist_pred)),
        completeness=float(np.mean(dist_gt)),
        precision=float(np.mean(dist_pred < inlier_threshold)),
        recall=float(np.mean(dist_gt < inlier_threshold)),
    )


def ground_truth_at(t: int, depths: Mapping[int, DepthImage], poses_at_t: Mapping[int, Pose],
                    k: Intrinsics, config: Optional[ExperimentConfig] = None,
                    frame_times: Optional[Mapping[int, int]] = None) -> TriangleMesh:
    """
    TSDF-fuse every depth observed up to t with its pose estimate at t into a
    fresh volume and extract the mesh.

    Args:
        t: Tick of the checkpoint
        depths: Frame id to ground-truth depth lookup
        poses_at_t: Latest estimate at t of every frame seen so far
        k: Camera intrinsics
        config: Volume resolution and bounds
        frame_times: Optional frame id to first-seen tick; frames newer than t are skipped
    """
    return GroundTruthBuilder(depths, k, config).build(t, poses_at_t, frame_times)


class GroundTruthBuilder:
    """
    Ground-truth meshes for checkpoint ticks.

    Every checkpoint is fused from scratch into a fresh volume from a frozen
    copy of its poses; meshes are cached per tick so strategies evaluated on
    the same plan share them. Builds for different ticks are independent and
    may run on separate threads.
    """

    def __init__(self, depths: Mapping[int, DepthImage], k: Intrinsics,
                 config: Optional[ExperimentConfig] = None):
        self.depths = depths
        self.k = k
        self.config = config or ExperimentConfig()
        self._meshes: Dict[int, TriangleMesh] = {}

    def build(self, t: int, poses_at_t: Mapping[int, Pose],
              frame_times: Optional[Mapping[int, int]] = None) -> TriangleMesh:
        if t in self._meshes:
            return self._meshes[t]
        poses = {frame: pose for frame, pose in poses_at_t.items()
                 if frame_times is None or frame_times.get(frame, t) <= t}
        if not poses:
            logger.debug(f"No frames observed by t={t}; ground truth is empty")
            return TriangleMesh.empty()

        volume = TsdfVolume.from_bounds(self.config.volume_bounds, self.config.voxel_size,
                                        truncation=self.config.truncation)
        for frame in sorted(poses):
            volume.integrate_depth(self.depths[frame], poses[frame], self.k)
        mesh = volume.extract_mesh()
        self._meshes[t] = mesh
        logger.debug(f"Ground truth at t={t}: {len(poses)} frames, {len(mesh.triangles)} triangles")
        return mesh
