"""
Deterministic synthetic feature extractors standing in for a learned image
encoder.
"""
from enum import Enum

import numpy as np

from models.feature_map import FeatureMap
from models.geometry import DepthImage
from .base import FIXED_POINT_SCALE, quantize

HASHED_CHANNELS = 8
_HASH_SALT = 0x5EED


class FeatureMode(Enum):
    """Supported extractor modes."""
    IDENTITY_DEPTH = "identity-depth"
    HASHED = "hashed"


def extract_features(depth: DepthImage, mode: FeatureMode = FeatureMode.IDENTITY_DEPTH,
                     frame_id: int = 0, channels: int = HASHED_CHANNELS) -> FeatureMap:
    """
    Compute per-pixel features for one view.

    Args:
        depth: Input depth image (only its size matters in hashed mode)
        mode: identity-depth emits one channel holding the depth (0 where
            invalid); hashed emits `channels` pseudo-random values in [-1, 1)
            keyed by pixel and frame id
        frame_id: Frame identifier keying the hashed features
        channels: Channel count for hashed mode

    Returns:
        FeatureMap with values on the fixed-point accumulation grid
    """
    mode = FeatureMode(mode)
    if mode is FeatureMode.IDENTITY_DEPTH:
        values = np.where(depth.valid_mask(), depth.data, 0.0)
        return FeatureMap(depth.width, depth.height, 1, quantize(values))

    rng = np.random.default_rng(np.random.SeedSequence([_HASH_SALT, int(frame_id)]))
    codes = rng.integers(0, int(FIXED_POINT_SCALE), size=(depth.height, depth.width, channels))
    values = codes / (FIXED_POINT_SCALE / 2.0) - 1.0
    return FeatureMap(depth.width, depth.height, channels, values)
