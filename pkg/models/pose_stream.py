"""
Dynamic SLAM pose streams: new-frame and pose-update events.

Stream files are JSON Lines, one event per line:
    {"t": <int>, "frame": <int>, "new": <bool>, "pose": [16 floats]}
with poses as row-major 4x4 world-from-camera matrices.
"""
import json
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple, Union

from .geometry import GeometryError, Pose


class StreamFormatError(ValueError):
    """Raised for malformed streams; `position` is the 1-based event (line) number."""

    def __init__(self, message: str, position: int = None):
        self.position = position
        prefix = f"line {position}: " if position is not None else ""
        super().__init__(f"{prefix}{message}")


@dataclass(frozen=True)
class PoseEvent:
    """A new frame or an updated estimate of a past frame's pose."""

    time: int
    frame_id: int
    pose: Pose
    is_new_frame: bool

    def to_dict(self) -> Dict[str, Any]:
        return {'t': self.time, 'frame': self.frame_id, 'new': self.is_new_frame,
                'pose': self.pose.to_list()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PoseEvent':
        missing = [key for key in ('t', 'frame', 'new', 'pose') if key not in data]
        if missing:
            raise ValueError(f"missing keys {missing}")
        if not isinstance(data['new'], bool):
            raise ValueError("'new' must be a boolean")
        return cls(time=int(data['t']), frame_id=int(data['frame']),
                   pose=Pose.from_list(data['pose']), is_new_frame=data['new'])


@dataclass
class PoseStream:
    """Ordered sequence of pose events."""

    events: List[PoseEvent] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[PoseEvent]:
        return iter(self.events)

    def validate(self) -> None:
        """
        Check the stream is well formed.

        Raises:
            StreamFormatError: On time regression, an update before the frame's
                new-frame event, or a repeated new-frame event
        """
        seen = set()
        last_time = None
        for position, event in enumerate(self.events, start=1):
            if last_time is not None and event.time < last_time:
                raise StreamFormatError(
                    f"time regression ({event.time} after {last_time})", position)
            last_time = event.time
            if event.is_new_frame:
                if event.frame_id in seen:
                    raise StreamFormatError(
                        f"frame {event.frame_id} announced twice", position)
                seen.add(event.frame_id)
            elif event.frame_id not in seen:
                raise StreamFormatError(
                    f"update for frame {event.frame_id} before its new-frame event", position)

    def ticks(self) -> Iterator[Tuple[int, List[PoseEvent]]]:
        """Yield (time, events) groups in stream order."""
        for time, group in groupby(self.events, key=lambda event: event.time):
            yield time, list(group)

    def frame_ids(self) -> List[int]:
        return [event.frame_id for event in self.events if event.is_new_frame]

    def update_count(self) -> int:
        return sum(1 for event in self.events if not event.is_new_frame)

    def estimates_at(self, ticks: List[int]) -> Dict[int, Dict[int, Pose]]:
        """
        Latest pose estimate of every frame known at each requested tick,
        after all events of that tick.
        """
        wanted = sorted(set(ticks))
        snapshots = {}
        current: Dict[int, Pose] = {}
        cursor = 0
        for tick in wanted:
            while cursor < len(self.events) and self.events[cursor].time <= tick:
                event = self.events[cursor]
                current[event.frame_id] = event.pose
                cursor += 1
            snapshots[tick] = dict(current)
        return snapshots

    def first_seen(self) -> Dict[int, int]:
        """Tick of each frame's new-frame event."""
        return {event.frame_id: event.time for event in self.events if event.is_new_frame}

    def to_jsonl(self) -> str:
        return ''.join(json.dumps(event.to_dict()) + '\n' for event in self.events)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_jsonl(), encoding='utf-8')

    @classmethod
    def from_jsonl(cls, text: str) -> 'PoseStream':
        """
        Parse and validate a JSON Lines stream; blank lines are skipped.

        Raises:
            StreamFormatError: With the line number of the offending event
        """
        events = []
        positions = []
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                events.append(PoseEvent.from_dict(json.loads(line)))
            except (json.JSONDecodeError, ValueError, TypeError, GeometryError) as e:
                raise StreamFormatError(str(e), line_number)
            positions.append(line_number)
        stream = cls(events)
        try:
            stream.validate()
        except StreamFormatError as e:
            line = positions[e.position - 1] if e.position else None
            raise StreamFormatError(str(e).split(': ', 1)[-1], line)
        return stream

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'PoseStream':
        return cls.from_jsonl(Path(path).read_text(encoding='utf-8'))
