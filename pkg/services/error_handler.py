"""
Centralized error handling for the reconstruction pipeline.

Classifies exceptions into categories, maps them to CLI exit codes and
produces user-facing messages with recovery suggestions.
"""

import functools
import traceback
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, IntEnum
from typing import Any, Callable, Dict, List, Optional

from loguru import logger
from pydantic import ValidationError

from models.geometry import GeometryError
from models.pose_stream import StreamFormatError
from models.scene import SceneFormatError
from processors.base import ProtocolViolationError, ReconstructionError, VolumeConfigError
from services.frame_storage import DepthFormatError, MissingFrameError
from services.report_writer import CheckpointMismatchError


class UsageError(ValueError):
    """Raised for invalid command-line usage."""
    pass


class ExitCode(IntEnum):
    """Process exit codes of the command-line tool."""
    SUCCESS = 0
    USAGE_ERROR = 1
    DATA_ERROR = 2
    PROTOCOL_VIOLATION = 3


class ErrorSeverity(Enum):
    """Error severity levels."""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Error categories for classification."""
    USAGE = "usage"
    INPUT_DATA = "input_data"
    STORAGE = "storage"
    PROTOCOL = "protocol"
    SYSTEM = "system"


CATEGORY_EXIT_CODES = {
    ErrorCategory.USAGE: ExitCode.USAGE_ERROR,
    ErrorCategory.INPUT_DATA: ExitCode.DATA_ERROR,
    ErrorCategory.STORAGE: ExitCode.DATA_ERROR,
    ErrorCategory.PROTOCOL: ExitCode.PROTOCOL_VIOLATION,
    ErrorCategory.SYSTEM: ExitCode.DATA_ERROR,
}


@dataclass
class ErrorInfo:
    """Structured error information."""
    error_id: str
    category: ErrorCategory
    severity: ErrorSeverity
    message: str
    user_message: str
    technical_details: str
    recovery_suggestions: List[str]
    timestamp: datetime
    context: Dict[str, Any] = field(default_factory=dict)
    traceback_info: Optional[str] = None


class ErrorHandler:
    """
    Maps exceptions raised anywhere in the pipeline to ErrorInfo records and
    exit codes, logging each one.
    """

    def __init__(self):
        self.error_patterns = self._initialize_error_patterns()

    def _initialize_error_patterns(self) -> Dict[str, Dict[str, Any]]:
        """Initialize known error patterns and their handling."""
        return {
            "invalid_config": {
                "category": ErrorCategory.USAGE,
                "severity": ErrorSeverity.MEDIUM,
                "user_message": "Invalid configuration or command-line arguments",
                "recovery_suggestions": [
                    "Check the flag values against --help",
                    "All lengths and thresholds must be positive",
                ]
            },
            "malformed_stream": {
                "category": ErrorCategory.INPUT_DATA,
                "severity": ErrorSeverity.HIGH,
                "user_message": "The pose stream is malformed",
                "recovery_suggestions": [
                    "Fix the event at the reported line",
                    "Events must be sorted by time and announce each frame before updating it",
                ]
            },
            "malformed_scene": {
                "category": ErrorCategory.INPUT_DATA,
                "severity": ErrorSeverity.HIGH,
                "user_message": "The scene file is invalid",
                "recovery_suggestions": [
                    "Fix the JSON at the reported line",
                    "A scene needs at least one sphere, box or plane primitive",
                ]
            },
            "invalid_pose": {
                "category": ErrorCategory.INPUT_DATA,
                "severity": ErrorSeverity.HIGH,
                "user_message": "A pose matrix is not a rigid transform",
                "recovery_suggestions": ["Poses must be row-major 4x4 world-from-camera matrices"]
            },
            "missing_frame": {
                "category": ErrorCategory.STORAGE,
                "severity": ErrorSeverity.HIGH,
                "user_message": "A depth frame referenced by the stream is missing",
                "recovery_suggestions": [
                    "Check that the depth directory matches the stream",
                    "Re-run the simulate command to regenerate frames",
                ]
            },
            "corrupted_depth": {
                "category": ErrorCategory.STORAGE,
                "severity": ErrorSeverity.HIGH,
                "user_message": "A depth frame file is corrupted",
                "recovery_suggestions": ["Regenerate the depth frames"]
            },
            "checkpoint_mismatch": {
                "category": ErrorCategory.INPUT_DATA,
                "severity": ErrorSeverity.MEDIUM,
                "user_message": "Predicted checkpoints do not match the stream's checkpoints",
                "recovery_suggestions": [
                    "Evaluate the directory written by reconstruct for this same stream",
                ]
            },
            "protocol_violation": {
                "category": ErrorCategory.PROTOCOL,
                "severity": ErrorSeverity.CRITICAL,
                "user_message": "De-integration removed data that was never integrated",
                "recovery_suggestions": [
                    "De-integrate only with the exact pose snapshot last used to integrate",
                ]
            },
            "volume_config": {
                "category": ErrorCategory.USAGE,
                "severity": ErrorSeverity.MEDIUM,
                "user_message": "Invalid volume configuration",
                "recovery_suggestions": ["Check voxel size, bounds and image sizes"]
            },
            "file_not_found": {
                "category": ErrorCategory.STORAGE,
                "severity": ErrorSeverity.MEDIUM,
                "user_message": "An input file could not be found",
                "recovery_suggestions": ["Check the input paths"]
            },
            "memory_error": {
                "category": ErrorCategory.SYSTEM,
                "severity": ErrorSeverity.CRITICAL,
                "user_message": "Out of memory",
                "recovery_suggestions": ["Use a larger voxel size or smaller volume bounds"]
            },
        }

    def handle_error(
        self,
        exception: Exception,
        context: Optional[Dict[str, Any]] = None,
        error_pattern: Optional[str] = None
    ) -> ErrorInfo:
        """
        Classify, log and record an exception.

        Args:
            exception: The exception that occurred
            context: Additional context information
            error_pattern: Specific error pattern if known

        Returns:
            ErrorInfo: Structured error information
        """
        if not error_pattern:
            error_pattern = self._classify_error(exception)
        pattern_info = self.error_patterns.get(error_pattern, {})

        error_info = ErrorInfo(
            error_id=self._generate_error_id(),
            category=pattern_info.get("category", ErrorCategory.SYSTEM),
            severity=pattern_info.get("severity", ErrorSeverity.HIGH),
            message=str(exception),
            user_message=pattern_info.get("user_message", "An unexpected error occurred"),
            technical_details=self._extract_technical_details(exception),
            recovery_suggestions=list(pattern_info.get("recovery_suggestions", [
                "Re-run with --log-level DEBUG for details",
            ])),
            timestamp=datetime.now(),
            context=context or {},
            traceback_info=traceback.format_exc(),
        )
        self._log_error(error_info)
        return error_info

    def _classify_error(self, exception: Exception) -> str:
        """Classify an error by exception type."""
        # Order matters: specific subclasses of ValueError come first
        if isinstance(exception, ProtocolViolationError):
            return "protocol_violation"
        if isinstance(exception, MissingFrameError):
            return "missing_frame"
        if isinstance(exception, DepthFormatError):
            return "corrupted_depth"
        if isinstance(exception, StreamFormatError):
            return "malformed_stream"
        if isinstance(exception, SceneFormatError):
            return "malformed_scene"
        if isinstance(exception, CheckpointMismatchError):
            return "checkpoint_mismatch"
        if isinstance(exception, GeometryError):
            return "invalid_pose"
        if isinstance(exception, VolumeConfigError):
            return "volume_config"
        if isinstance(exception, (ValidationError, UsageError)):
            return "invalid_config"
        if isinstance(exception, FileNotFoundError):
            return "file_not_found"
        if isinstance(exception, MemoryError):
            return "memory_error"
        if isinstance(exception, ReconstructionError):
            return "protocol_violation"
        return "unknown_error"

    def exit_code_for(self, exception: Exception) -> ExitCode:
        """CLI exit code for an exception: 1 usage, 2 data, 3 protocol violation."""
        pattern = self.error_patterns.get(self._classify_error(exception), {})
        return CATEGORY_EXIT_CODES[pattern.get("category", ErrorCategory.SYSTEM)]

    def _extract_technical_details(self, exception: Exception) -> str:
        details = [
            f"Exception Type: {type(exception).__name__}",
            f"Exception Message: {str(exception)}"
        ]
        for attribute in ('position', 'line', 'voxel', 'frame_id', 'filename'):
            value = getattr(exception, attribute, None)
            if value is not None:
                details.append(f"{attribute}: {value}")
        return "; ".join(details)

    def _generate_error_id(self) -> str:
        return f"ERR_{datetime.now().strftime('%Y%m%d_%H%M%S')}_{str(uuid.uuid4())[:8]}"

    def _log_error(self, error_info: ErrorInfo) -> None:
        level = {
            ErrorSeverity.LOW: "INFO",
            ErrorSeverity.MEDIUM: "WARNING",
            ErrorSeverity.HIGH: "ERROR",
            ErrorSeverity.CRITICAL: "CRITICAL"
        }.get(error_info.severity, "ERROR")
        logger.log(
            level,
            f"Error {error_info.error_id}: {error_info.message} "
            f"[{error_info.category.value}] - {error_info.technical_details}"
        )


def error_handler_decorator(error_handler: ErrorHandler, context_func: Optional[Callable] = None):
    """
    Decorator attaching an ErrorInfo to any exception escaping the function.

    Args:
        error_handler: ErrorHandler instance
        context_func: Optional function to generate context information
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                context = context_func(*args, **kwargs) if context_func else {}
                e.error_info = error_handler.handle_error(e, context)
                raise
        return wrapper
    return decorator
