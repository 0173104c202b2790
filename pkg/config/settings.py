"""
Configuration settings for the online reconstruction pipeline
"""

import os
import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger

# Base directory
BASE_DIR = Path(__file__).parent.parent

# Output locations
OUTPUT_DIR = Path(os.getenv('RECON_OUTPUT_DIR', BASE_DIR / 'runs'))
LOG_DIR = Path(os.getenv('RECON_LOG_DIR', BASE_DIR / 'logs'))

# Volume settings
VOXEL_SIZE = 0.04
TRUNCATION_VOXELS = 3
# Scene bounding box (min corner, max corner) of the default room, meters
VOLUME_BOUNDS = ((-3.0, -3.0, 0.0), (3.0, 3.0, 3.0))

# Pose filter settings
BUNDLE_SIZE = 9
UPDATE_DISTANCE = 0.45
KEYFRAME_TRANSLATION = 0.10
KEYFRAME_ROTATION_DEG = 15.0
THRESHOLD_TOLERANCE = 1e-9

# Evaluation settings
INLIER_THRESHOLD = 0.05
SAMPLE_COUNT = 200_000
CLIP_DISTANCE = 1.0
HISTOGRAM_BIN = 0.05
HISTOGRAM_CLIP = 2.0

# Camera defaults (desk scale)
IMAGE_WIDTH = 320
IMAGE_HEIGHT = 240
FOCAL_LENGTH = 277.0

# Simulator settings
MAX_RANGE = 10.0
TRACE_EPSILON = 1e-4
TRACE_MAX_STEPS = 256
TRAJECTORY_FRAMES = 300
DRIFT_SIGMA_T = 0.002
DRIFT_SIGMA_R_DEG = 0.0

# Logging settings
LOG_LEVEL = os.getenv('RECON_LOG_LEVEL', 'INFO')

VERSION = '0.3.0'


def configure_logging(level: Optional[str] = None,
                      log_file: Optional[Union[str, Path]] = None) -> None:
    """
    Configure loguru sinks for command-line runs.

    Args:
        level: Log level name, defaults to LOG_LEVEL
        log_file: Optional path of a rotating log file
    """
    level = level or LOG_LEVEL
    logger.remove()  # Remove default handler
    logger.add(
        sys.stderr,
        level=level,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
               "<level>{level: <8}</level> | "
               "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
               "<level>{message}</level>"
    )
    if log_file:
        logger.add(
            str(log_file),
            rotation="100 MB",
            retention="30 days",
            level=level
        )
