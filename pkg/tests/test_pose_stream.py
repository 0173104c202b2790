"""
Tests for pose stream parsing and validation.
"""

import json
from pathlib import Path

import pytest

from models.geometry import Pose
from models.pose_stream import PoseEvent, PoseStream, StreamFormatError

FIXTURES = Path(__file__).parent / 'fixtures'


def event_line(t, frame, new, x=0.0):
    return json.dumps(PoseEvent(t, frame, Pose.translate(x, 0, 0), new).to_dict())


class TestParsing:
    """Test JSON Lines parsing"""

    def test_load_fixture(self):
        stream = PoseStream.load(FIXTURES / 'additive_updates.jsonl')
        assert len(stream) == 3
        assert stream.frame_ids() == [0]
        assert stream.update_count() == 2
        assert stream.events[2].pose.translation.tolist() == [0.7, 0.0, 0.0]

    def test_round_trip(self, tmp_path):
        stream = PoseStream.load(FIXTURES / 'second_crossing.jsonl')
        stream.save(tmp_path / 'stream.jsonl')
        assert PoseStream.load(tmp_path / 'stream.jsonl').to_jsonl() == stream.to_jsonl()

    def test_blank_lines_are_skipped(self):
        text = '\n'.join(['', event_line(0, 0, True), '', event_line(1, 0, False, 0.2)])
        assert len(PoseStream.from_jsonl(text)) == 2

    def test_update_before_new_frame(self):
        with pytest.raises(StreamFormatError) as excinfo:
            PoseStream.load(FIXTURES / 'update_before_new.jsonl')
        assert excinfo.value.position == 2
        assert 'line 2' in str(excinfo.value)

    def test_time_regression(self):
        with pytest.raises(StreamFormatError) as excinfo:
            PoseStream.load(FIXTURES / 'time_regression.jsonl')
        assert excinfo.value.position == 3

    def test_position_counts_blank_lines(self):
        text = '\n'.join([event_line(0, 0, True), '', event_line(1, 0, True)])
        with pytest.raises(StreamFormatError) as excinfo:
            PoseStream.from_jsonl(text)
        assert excinfo.value.position == 3

    def test_invalid_json(self):
        with pytest.raises(StreamFormatError) as excinfo:
            PoseStream.from_jsonl(event_line(0, 0, True) + '\n{"t": 1,')
        assert excinfo.value.position == 2

    def test_missing_keys(self):
        with pytest.raises(StreamFormatError):
            PoseStream.from_jsonl('{"t": 0, "frame": 0, "pose": []}')

    def test_new_must_be_boolean(self):
        line = event_line(0, 0, True).replace('true', '1')
        with pytest.raises(StreamFormatError):
            PoseStream.from_jsonl(line)

    def test_non_rigid_pose(self):
        record = json.loads(event_line(0, 0, True))
        record['pose'][0] = 2.0
        with pytest.raises(StreamFormatError):
            PoseStream.from_jsonl(json.dumps(record))


class TestQueries:
    """Test tick grouping and pose snapshots"""

    @pytest.fixture
    def stream(self):
        return PoseStream.from_jsonl('\n'.join([
            event_line(0, 0, True, 0.0),
            event_line(1, 1, True, 0.1),
            event_line(1, 0, False, 0.05),
            event_line(3, 2, True, 0.2),
            event_line(3, 1, False, 0.15),
        ]))

    def test_ticks(self, stream):
        ticks = [(time, [event.frame_id for event in events]) for time, events in stream.ticks()]
        assert ticks == [(0, [0]), (1, [1, 0]), (3, [2, 1])]

    def test_estimates_at(self, stream):
        snapshots = stream.estimates_at([0, 1, 2, 3])
        assert set(snapshots[0]) == {0}
        assert snapshots[1][0] == Pose.translate(0.05, 0, 0)
        assert snapshots[2] == snapshots[1]
        assert snapshots[3][1] == Pose.translate(0.15, 0, 0)
        assert set(snapshots[3]) == {0, 1, 2}

    def test_first_seen(self, stream):
        assert stream.first_seen() == {0: 0, 1: 1, 2: 3}
