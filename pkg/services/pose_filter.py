"""
Pose update filtering between a SLAM pose stream and the reconstruction.

Selects keyframes, groups them into K-frame bundles and, once the summed
update distance of a bundle's frames reaches d, plans a de-integration of the
stale bundle followed by its re-integration under the fresh poses.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from loguru import logger

from config import settings
from models.bundle import ActionType, Bundle, ReconAction
from models.experiment_config import ExperimentConfig
from models.geometry import Pose, rotation_angle, translation_distance
from models.pose_stream import PoseEvent, PoseStream


@dataclass
class UpdatePlan:
    """Stale and fresh pose snapshots of a bundle whose drift reached d."""

    bundle_id: int
    total_distance: float
    stale: Dict[int, Pose]
    fresh: Dict[int, Pose]


def keyframe_filter(event: PoseEvent, last_keyframe_pose: Optional[Pose],
                    min_translation: float = settings.KEYFRAME_TRANSLATION,
                    min_rotation: float = settings.KEYFRAME_ROTATION_DEG) -> bool:
    """
    Decide whether a new frame becomes a keyframe.

    Accepts the first frame, or any frame at least `min_translation` meters or
    `min_rotation` degrees away from the previous keyframe. Updates never
    create keyframes.
    """
    if not event.is_new_frame:
        return False
    if last_keyframe_pose is None:
        return True
    tolerance = settings.THRESHOLD_TOLERANCE
    return (translation_distance(last_keyframe_pose, event.pose) >= min_translation - tolerance or
            rotation_angle(last_keyframe_pose, event.pose) >= min_rotation - tolerance)


def assemble_bundle(pending_keyframes: List[int], current_poses: Dict[int, Pose],
                    bundle_id: int, time: int,
                    bundle_size: int = settings.BUNDLE_SIZE,
                    flush: bool = False) -> Optional[Bundle]:
    """
    Close a bundle once `bundle_size` keyframes are pending.

    With flush=True any non-empty pending list is closed (end of stream). The
    pending list is cleared whenever a bundle is emitted.
    """
    if len(pending_keyframes) < bundle_size and not (flush and pending_keyframes):
        return None
    members = list(pending_keyframes)
    pending_keyframes.clear()
    return Bundle(
        bundle_id=bundle_id,
        created_at=time,
        member_frames=members,
        poses_at_integration={frame: current_poses[frame] for frame in members},
    )


def detect_update(bundle: Bundle, current_poses: Dict[int, Pose],
                  threshold: float = settings.UPDATE_DISTANCE) -> Optional[UpdatePlan]:
    """Sum each member's displacement since integration; plan an update at >= threshold."""
    fresh = {frame: current_poses[frame] for frame in bundle.member_frames}
    total = sum(translation_distance(bundle.poses_at_integration[frame], fresh[frame])
                for frame in bundle.member_frames)
    if total < threshold - settings.THRESHOLD_TOLERANCE:
        return None
    return UpdatePlan(bundle_id=bundle.bundle_id, total_distance=total,
                      stale=dict(bundle.poses_at_integration), fresh=fresh)


@dataclass
class PosePlan:
    """Result of running the filter over a whole stream."""

    actions: List[ReconAction] = field(default_factory=list)
    bundles: List[Bundle] = field(default_factory=list)
    keyframes: List[int] = field(default_factory=list)

    def checkpoint_ticks(self) -> List[int]:
        """Ticks at which a new bundle is integrated."""
        return sorted({action.time for action in self.actions
                       if action.kind is ActionType.INTEGRATE})

    def count(self, kind: ActionType) -> int:
        return sum(1 for action in self.actions if action.kind is kind)


class PoseFilter:
    """
    Pure, single-threaded state machine consuming pose events tick by tick.

    Drift is scanned once per tick, after all of the tick's events, over the
    integrated bundles in creation order; each bundle yields at most one
    de-/re-integration pair per tick.
    """

    def __init__(self, config: Optional[ExperimentConfig] = None):
        self.config = config or ExperimentConfig()
        self.current_poses: Dict[int, Pose] = {}
        self.last_keyframe_pose: Optional[Pose] = None
        self.pending: List[int] = []
        self.plan = PosePlan()

    def _emit(self, kind: ActionType, bundle: Bundle, time: int, snapshot: Dict[int, Pose]):
        self.plan.actions.append(ReconAction.for_bundle(kind, bundle, time, snapshot))

    def _close_bundle(self, time: int, flush: bool = False) -> None:
        bundle = assemble_bundle(self.pending, self.current_poses, len(self.plan.bundles),
                                 time, self.config.bundle_size, flush=flush)
        if bundle is not None:
            self.plan.bundles.append(bundle)
            self._emit(ActionType.INTEGRATE, bundle, time, bundle.poses_at_integration)

    def process_tick(self, time: int, events: List[PoseEvent]) -> None:
        for event in events:
            self.current_poses[event.frame_id] = event.pose
            if keyframe_filter(event, self.last_keyframe_pose,
                               self.config.keyframe_translation, self.config.keyframe_rotation):
                self.last_keyframe_pose = event.pose
                self.pending.append(event.frame_id)
                self.plan.keyframes.append(event.frame_id)
                self._close_bundle(time)

        for bundle in self.plan.bundles:
            update = detect_update(bundle, self.current_poses, self.config.update_distance)
            if update is None:
                continue
            logger.debug(f"Bundle {bundle.bundle_id} drifted {update.total_distance:.3f}m at t={time}")
            self._emit(ActionType.DEINTEGRATE, bundle, time, update.stale)
            bundle.poses_at_integration = update.fresh
            self._emit(ActionType.REINTEGRATE, bundle, time, update.fresh)

    def finish(self, time: int) -> PosePlan:
        """Flush a final partial bundle at end of stream."""
        self._close_bundle(time, flush=True)
        return self.plan


def plan_actions(stream: PoseStream, config: Optional[ExperimentConfig] = None) -> PosePlan:
    """
    Plan the ordered reconstruction actions for a pose stream.

    Raises:
        StreamFormatError: If the stream is malformed
    """
    stream.validate()
    pose_filter = PoseFilter(config)
    last_time = 0
    for time, events in stream.ticks():
        pose_filter.process_tick(time, events)
        last_time = time
    plan = pose_filter.finish(last_time)
    logger.info(
        f"Planned {plan.count(ActionType.INTEGRATE)} integrations and "
        f"{plan.count(ActionType.REINTEGRATE)} updates from {len(plan.keyframes)} keyframes"
    )
    return plan
