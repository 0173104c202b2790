"""
Frame bundles and the reconstruction actions planned for them.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

from .geometry import Pose


class ActionType(Enum):
    """Reconstruction action kinds."""
    INTEGRATE = "integrate"
    DEINTEGRATE = "deintegrate"
    REINTEGRATE = "reintegrate"


@dataclass
class Bundle:
    """
    Keyframes processed as one unit, with the pose snapshot attached at its
    most recent (re-)integration.
    """

    bundle_id: int
    created_at: int
    member_frames: List[int]
    poses_at_integration: Dict[int, Pose] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.poses_at_integration) != set(self.member_frames):
            raise ValueError(
                f"Bundle {self.bundle_id}: pose snapshot does not cover exactly its members"
            )

    @property
    def size(self) -> int:
        return len(self.member_frames)


@dataclass(frozen=True)
class ReconAction:
    """One step of the reconstruction plan, applied strictly in emitted order."""

    kind: ActionType
    bundle_id: int
    time: int
    frame_ids: Tuple[int, ...]
    poses: Tuple[Pose, ...]

    @classmethod
    def for_bundle(cls, kind: ActionType, bundle: Bundle, time: int,
                   snapshot: Dict[int, Pose]) -> 'ReconAction':
        frames = tuple(bundle.member_frames)
        return cls(kind=kind, bundle_id=bundle.bundle_id, time=time,
                   frame_ids=frames, poses=tuple(snapshot[frame] for frame in frames))

    def snapshot(self) -> Dict[int, Pose]:
        return dict(zip(self.frame_ids, self.poses))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'action': self.kind.value,
            'bundle': self.bundle_id,
            't': self.time,
            'frames': list(self.frame_ids),
            'poses': [pose.to_list() for pose in self.poses],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ReconAction':
        return cls(kind=ActionType(data['action']), bundle_id=int(data['bundle']),
                   time=int(data['t']), frame_ids=tuple(int(f) for f in data['frames']),
                   poses=tuple(Pose.from_list(values) for values in data['poses']))
