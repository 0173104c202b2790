"""
Tests for error classification and exit codes.
"""

import pytest
from pydantic import ValidationError

from models.experiment_config import ExperimentConfig
from models.geometry import GeometryError
from models.pose_stream import StreamFormatError
from models.scene import SceneFormatError
from processors.base import ProtocolViolationError, ReconstructionError, VolumeConfigError
from services.error_handler import (
    ErrorCategory, ErrorHandler, ErrorSeverity, ExitCode, UsageError, error_handler_decorator,
)
from services.frame_storage import DepthFormatError, MissingFrameError
from services.report_writer import CheckpointMismatchError


def validation_error() -> ValidationError:
    try:
        ExperimentConfig(voxel_size=-1.0)
    except ValidationError as e:
        return e
    raise AssertionError("negative voxel size was accepted")


@pytest.fixture
def handler():
    return ErrorHandler()


class TestClassification:
    """Test exception to exit code mapping"""

    @pytest.mark.parametrize('exception, code', [
        (UsageError("bad flag"), ExitCode.USAGE_ERROR),
        (VolumeConfigError("voxel size"), ExitCode.USAGE_ERROR),
        (StreamFormatError("time went backwards", 3), ExitCode.DATA_ERROR),
        (SceneFormatError("bad json", 2), ExitCode.DATA_ERROR),
        (GeometryError("not orthonormal"), ExitCode.DATA_ERROR),
        (MissingFrameError(4), ExitCode.DATA_ERROR),
        (DepthFormatError("short file"), ExitCode.DATA_ERROR),
        (CheckpointMismatchError("differ", missing=[3]), ExitCode.DATA_ERROR),
        (FileNotFoundError("stream.jsonl"), ExitCode.DATA_ERROR),
        (RuntimeError("boom"), ExitCode.DATA_ERROR),
        (ProtocolViolationError("negative weight", (1, 2, 3)), ExitCode.PROTOCOL_VIOLATION),
        (ReconstructionError("volume broke"), ExitCode.PROTOCOL_VIOLATION),
    ])
    def test_exit_codes(self, handler, exception, code):
        assert handler.exit_code_for(exception) == code

    def test_validation_error_is_usage(self, handler):
        assert handler.exit_code_for(validation_error()) == ExitCode.USAGE_ERROR

    def test_missing_frame_is_not_generic_file_error(self, handler):
        info = handler.handle_error(MissingFrameError(4))
        assert info.user_message.startswith("A depth frame")
        assert "frame_id: 4" in info.technical_details


class TestHandleError:
    """Test ErrorInfo records"""

    def test_error_info(self, handler):
        info = handler.handle_error(ProtocolViolationError("negative weight", (1, 2, 3)),
                                    context={'command': 'reconstruct'})
        assert info.category == ErrorCategory.PROTOCOL
        assert info.severity == ErrorSeverity.CRITICAL
        assert handler.exit_code_for(ProtocolViolationError("negative weight")) == \
            ExitCode.PROTOCOL_VIOLATION
        assert info.error_id.startswith("ERR_")
        assert info.context == {'command': 'reconstruct'}
        assert "voxel: (1, 2, 3)" in info.technical_details
        assert info.recovery_suggestions

    def test_stream_position_in_details(self, handler):
        info = handler.handle_error(StreamFormatError("update before new frame", 7))
        assert "position: 7" in info.technical_details
        assert "line 7" in info.message

    def test_unknown_error_gets_defaults(self, handler):
        info = handler.handle_error(RuntimeError("boom"))
        assert info.category == ErrorCategory.SYSTEM
        assert info.user_message == "An unexpected error occurred"

    def test_explicit_pattern(self, handler):
        info = handler.handle_error(RuntimeError("oom"), error_pattern="memory_error")
        assert info.user_message == "Out of memory"


class TestDecorator:
    """Test the error handler decorator"""

    def test_attaches_error_info(self, handler):
        @error_handler_decorator(handler, context_func=lambda value: {'value': value})
        def fail(value):
            raise UsageError(f"bad value {value}")

        with pytest.raises(UsageError) as excinfo:
            fail(3)
        assert excinfo.value.error_info.context == {'value': 3}
        assert excinfo.value.error_info.category == ErrorCategory.USAGE

    def test_passes_results_through(self, handler):
        @error_handler_decorator(handler)
        def succeed():
            return 42

        assert succeed() == 42
