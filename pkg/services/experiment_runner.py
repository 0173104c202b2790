"""
Reconstruction experiments over a dynamic pose stream.

Plans actions once with the pose filter, filters them per strategy, applies
them to a TSDF or feature volume through the reconstruction worker and
evaluates a checkpoint after every tick that integrates a new bundle.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from models.bundle import ActionType, ReconAction
from models.experiment_config import ExperimentConfig
from models.geometry import DepthImage, Intrinsics, Pose
from models.mesh import TriangleMesh
from models.pose_stream import PoseStream
from models.scene import Scene
from processors.base import VoxelVolume
from processors.feature_extractor import FeatureMode, extract_features
from processors.feature_volume import FeatureVolume, TsdfProjectionHead
from processors.tsdf_volume import TsdfVolume
from services.action_worker import (
    AppliedAction, CheckpointMarker, ReconstructionWorker, ResetMarker, WorkItem,
)
from services.metrics import Checkpoint, GroundTruthBuilder, MetricsReport, evaluate
from services.pose_filter import PosePlan, plan_actions
from services.simulator import render_depth


class Strategy(Enum):
    """How pose updates are handled."""
    NO_UPDATES = "no-updates"
    REINTEGRATE_ONLY = "reintegrate-only"
    DEINTEGRATE = "deintegrate"
    FROM_SCRATCH = "from-scratch"


class Representation(Enum):
    """Reconstruction volume type."""
    TSDF = "tsdf"
    FEATVOL = "featvol"


COMPARED_STRATEGIES = (Strategy.NO_UPDATES, Strategy.REINTEGRATE_ONLY, Strategy.DEINTEGRATE)


def filter_actions(actions: List[ReconAction], strategy: Strategy) -> List[ReconAction]:
    """
    Drop the actions a strategy ignores: no-updates keeps only Integrate,
    reintegrate-only drops Deintegrate, the others keep everything.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.NO_UPDATES:
        return [action for action in actions if action.kind is ActionType.INTEGRATE]
    if strategy is Strategy.REINTEGRATE_ONLY:
        return [action for action in actions if action.kind is not ActionType.DEINTEGRATE]
    return list(actions)


def schedule(plan: PosePlan, strategy: Strategy,
             checkpoint_ticks: Optional[List[int]] = None) -> List[WorkItem]:
    """
    Ordered work items for the worker: the strategy's actions with a
    checkpoint marker after the last action of every checkpoint tick.

    from-scratch replaces each tick's updates by clearing the volume and
    integrating every bundle under its latest snapshot.
    """
    strategy = Strategy(strategy)
    ticks = set(plan.checkpoint_ticks() if checkpoint_ticks is None else checkpoint_ticks)
    actions = filter_actions(plan.actions, strategy)

    by_tick: Dict[int, List[ReconAction]] = {}
    for action in actions:
        by_tick.setdefault(action.time, []).append(action)

    items: List[WorkItem] = []
    latest: Dict[int, ReconAction] = {}
    for time in sorted(set(by_tick) | ticks):
        tick_actions = by_tick.get(time, [])
        if strategy is Strategy.FROM_SCRATCH:
            rebuild = any(action.kind is not ActionType.INTEGRATE for action in tick_actions)
            for action in tick_actions:
                if action.kind is not ActionType.DEINTEGRATE:
                    latest[action.bundle_id] = action
            if rebuild:
                items.append(ResetMarker(time))
                for bundle_id in sorted(latest):
                    last = latest[bundle_id]
                    if last.time != time:
                        last = ReconAction(ActionType.INTEGRATE, bundle_id, time,
                                           last.frame_ids, last.poses)
                    items.append(last)
            else:
                items.extend(tick_actions)
        else:
            items.extend(tick_actions)
        if time in ticks:
            items.append(CheckpointMarker(time))
    return items


class ObservationSource:
    """
    Resolves the per-frame payload of each action.

    Depth comes from the depth store; feature maps are extracted once per
    keyframe and cached. With recompute_depth, re-integration re-renders the
    depth at the updated pose; de-integration always removes exactly the
    payload last integrated for that frame.
    """

    def __init__(self, depths: Mapping[int, DepthImage], representation: Representation,
                 k: Intrinsics, scene: Optional[Scene] = None, recompute_depth: bool = False):
        self.depths = depths
        self.representation = Representation(representation)
        self.k = k
        self.scene = scene
        self.recompute_depth = recompute_depth
        if recompute_depth and scene is None:
            raise ValueError("recompute_depth needs the scene to re-render depth")
        self._feature_cache: Dict[int, Any] = {}
        self._integrated: Dict[int, Any] = {}

    def _payload(self, frame_id: int, pose: Pose, kind: ActionType) -> Any:
        if self.recompute_depth and kind is ActionType.REINTEGRATE:
            depth = render_depth(self.scene, pose, self.k)
            if self.representation is Representation.TSDF:
                return depth
            return extract_features(depth, FeatureMode.IDENTITY_DEPTH, frame_id)
        if self.representation is Representation.TSDF:
            return self.depths[frame_id]
        if frame_id not in self._feature_cache:
            self._feature_cache[frame_id] = extract_features(
                self.depths[frame_id], FeatureMode.IDENTITY_DEPTH, frame_id)
        return self._feature_cache[frame_id]

    def __call__(self, action: ReconAction) -> Dict[int, Any]:
        payloads = {}
        for frame_id, pose in zip(action.frame_ids, action.poses):
            if action.kind is not ActionType.REINTEGRATE and frame_id in self._integrated:
                payloads[frame_id] = self._integrated[frame_id]
            else:
                payloads[frame_id] = self._payload(frame_id, pose, action.kind)
                self._integrated[frame_id] = payloads[frame_id]
        return payloads

    @property
    def cached_features(self) -> int:
        return len(self._feature_cache)


def make_volume(representation: Representation, config: ExperimentConfig) -> VoxelVolume:
    """
    Empty volume for a representation.

    The feature volume fuses identity-depth features through a
    TsdfProjectionHead: the voxel visibility rule is the TSDF one, so tsdf and
    featvol runs differ only in the fusion code path (back-projection,
    running average, linear de-integration) and their metrics are directly
    comparable. Dense back-projection (no head) has no surface to mesh.
    """
    representation = Representation(representation)
    if representation is Representation.TSDF:
        return TsdfVolume.from_bounds(config.volume_bounds, config.voxel_size,
                                      truncation=config.truncation)
    return FeatureVolume.from_bounds(config.volume_bounds, config.voxel_size, channels=1,
                                     head=TsdfProjectionHead(config.truncation))


@dataclass
class CheckpointResult:
    checkpoint: Checkpoint
    report: Optional[MetricsReport]

    def to_dict(self, strategy: Strategy) -> Dict[str, Any]:
        record: Dict[str, Any] = {'t': self.checkpoint.time, 'strategy': Strategy(strategy).value}
        if self.report is not None:
            record.update(self.report.to_dict())
        return record


@dataclass
class ExperimentResult:
    """Outcome of one strategy / representation run."""

    strategy: Strategy
    representation: Representation
    plan: PosePlan
    volume: VoxelVolume
    applied: List[AppliedAction] = field(default_factory=list)
    results: List[CheckpointResult] = field(default_factory=list)

    @property
    def checkpoints(self) -> List[Checkpoint]:
        return [result.checkpoint for result in self.results]

    def final_report(self) -> Optional[MetricsReport]:
        for result in reversed(self.results):
            if result.report is not None:
                return result.report
        return None

    def timing_summary(self) -> Dict[str, float]:
        """Mean wall time per action kind, milliseconds."""
        summary = {}
        for kind in ActionType:
            times = [entry.elapsed_ms for entry in self.applied if entry.action.kind is kind]
            if times:
                summary[f"mean_{kind.value}_ms"] = float(np.mean(times))
        return summary


def reconstruct(plan: PosePlan, depths: Mapping[int, DepthImage], k: Intrinsics,
                strategy: Strategy = Strategy.DEINTEGRATE,
                representation: Representation = Representation.TSDF,
                config: Optional[ExperimentConfig] = None,
                scene: Optional[Scene] = None) -> Tuple[VoxelVolume, Dict[int, TriangleMesh],
                                                        List[AppliedAction]]:
    """
    Apply a strategy's actions on the worker thread.

    Returns:
        (final volume, predicted mesh per checkpoint tick, applied actions)

    Raises:
        ProtocolViolationError: Propagated from the volume
        MissingFrameError: If a referenced depth frame is absent
    """
    config = config or ExperimentConfig()
    items = schedule(plan, strategy)
    meshes: Dict[int, TriangleMesh] = {}

    def on_checkpoint(time: int, volume: VoxelVolume) -> None:
        meshes[time] = volume.extract_mesh()

    source = ObservationSource(depths, representation, k, scene, config.recompute_depth)
    worker = ReconstructionWorker(make_volume(representation, config), source, k, on_checkpoint,
                                  worker_id=f"{Strategy(strategy).value}-{Representation(representation).value}")
    worker.start()
    for item in items:
        worker.submit(item)
    worker.stop()
    worker.join()
    logger.debug(f"Worker finished: {worker.get_status()}")
    return worker.volume, meshes, worker.applied


def run_experiment(stream: PoseStream, depths: Mapping[int, DepthImage], k: Intrinsics,
                   strategy: Strategy = Strategy.DEINTEGRATE,
                   representation: Representation = Representation.TSDF,
                   config: Optional[ExperimentConfig] = None, scene: Optional[Scene] = None,
                   plan: Optional[PosePlan] = None,
                   ground_truth: Optional[GroundTruthBuilder] = None,
                   evaluate_checkpoints: bool = True,
                   show_progress: bool = False) -> ExperimentResult:
    """
    Reconstruct a stream with one strategy and evaluate every checkpoint
    against the ground truth built from the latest poses at that tick.

    Args:
        plan: Precomputed pose-filter plan, shared across strategies
        ground_truth: Shared ground-truth builder (meshes are cached per tick)
        evaluate_checkpoints: Skip metric computation when False
    """
    config = config or ExperimentConfig()
    strategy = Strategy(strategy)
    representation = Representation(representation)
    plan = plan or plan_actions(stream, config)

    volume, meshes, applied = reconstruct(plan, depths, k, strategy, representation,
                                          config, scene)
    ticks = plan.checkpoint_ticks()
    if evaluate_checkpoints:
        ground_truth = ground_truth or GroundTruthBuilder(depths, k, config)
        poses = stream.estimates_at(ticks)
        frame_times = stream.first_seen()

    def score(t: int) -> CheckpointResult:
        gt_mesh = TriangleMesh.empty()
        report = None
        if evaluate_checkpoints:
            gt_mesh = ground_truth.build(t, poses[t], frame_times)
            report = evaluate(meshes[t], gt_mesh, config.inlier_threshold,
                              config.n_samples, config.clip_distance,
                              seed=config.seed, gt_seed=config.seed + 1)
            if report is None:
                logger.warning(f"Skipping checkpoint t={t}: ground truth is empty")
        checkpoint = Checkpoint(time=t, predicted_mesh=meshes[t], ground_truth_mesh=gt_mesh)
        return CheckpointResult(checkpoint, report)

    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        results = list(tqdm(pool.map(score, ticks), total=len(ticks),
                            desc=f"Evaluating {strategy.value}", disable=not show_progress))

    result = ExperimentResult(strategy, representation, plan, volume, applied, results)
    final = result.final_report()
    if final is not None:
        logger.info(f"{strategy.value}/{representation.value}: {len(results)} checkpoints, "
                    f"final fscore {final.fscore:.3f}, chamfer {final.chamfer:.4f}m")
    return result


def compare_strategies(stream: PoseStream, depths: Mapping[int, DepthImage], k: Intrinsics,
                       representation: Representation = Representation.TSDF,
                       config: Optional[ExperimentConfig] = None,
                       strategies=COMPARED_STRATEGIES,
                       show_progress: bool = False) -> Dict[Strategy, ExperimentResult]:
    """Run several strategies on one shared plan and ground truth."""
    config = config or ExperimentConfig()
    plan = plan_actions(stream, config)
    ground_truth = GroundTruthBuilder(depths, k, config)
    return {
        Strategy(strategy): run_experiment(stream, depths, k, strategy, representation, config,
                                           plan=plan, ground_truth=ground_truth,
                                           show_progress=show_progress)
        for strategy in strategies
    }
