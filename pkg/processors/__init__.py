# Reconstruction operators: voxel volumes and feature extraction

from .base import (
    ProtocolViolationError,
    ReconstructionError,
    VolumeConfigError,
    VoxelVolume,
)
from .tsdf_volume import TsdfVolume
from .feature_volume import FeatureVolume, TsdfProjectionHead
from .feature_extractor import FeatureMode, extract_features

__all__ = [
    "ProtocolViolationError",
    "ReconstructionError",
    "VolumeConfigError",
    "VoxelVolume",
    "TsdfVolume",
    "FeatureVolume",
    "TsdfProjectionHead",
    "FeatureMode",
    "extract_features",
]
