"""
Validated configuration models for simulation and reconstruction runs.

Defaults come from config.settings; every model serializes with
model_dump() into the run metadata so results are self-describing.
"""
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import settings
from .geometry import Intrinsics


class ExperimentConfig(BaseModel):
    """Reconstruction, pose filtering and evaluation parameters."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    voxel_size: float = Field(settings.VOXEL_SIZE, gt=0)
    truncation_voxels: int = Field(settings.TRUNCATION_VOXELS, gt=0)
    bundle_size: int = Field(settings.BUNDLE_SIZE, gt=0, description="K")
    update_distance: float = Field(settings.UPDATE_DISTANCE, gt=0, description="d, meters")
    keyframe_translation: float = Field(settings.KEYFRAME_TRANSLATION, gt=0)
    keyframe_rotation: float = Field(settings.KEYFRAME_ROTATION_DEG, gt=0)
    inlier_threshold: float = Field(settings.INLIER_THRESHOLD, gt=0)
    n_samples: int = Field(settings.SAMPLE_COUNT, gt=0)
    clip_distance: float = Field(settings.CLIP_DISTANCE, gt=0)
    histogram_bin: float = Field(settings.HISTOGRAM_BIN, gt=0)
    histogram_clip: float = Field(settings.HISTOGRAM_CLIP, gt=0)
    volume_bounds: Tuple[Tuple[float, float, float], Tuple[float, float, float]] = \
        settings.VOLUME_BOUNDS
    recompute_depth: bool = False
    threads: int = Field(1, gt=0)
    seed: int = Field(0, ge=0)

    @property
    def truncation(self) -> float:
        """Truncation distance tau in meters."""
        return self.truncation_voxels * self.voxel_size

    @model_validator(mode='after')
    def _check_bounds(self) -> 'ExperimentConfig':
        low, high = self.volume_bounds
        if any(h - l < self.voxel_size for l, h in zip(low, high)):
            raise ValueError("volume_bounds must span at least one voxel on every axis")
        return self


class LoopClosure(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    trigger_time: int = Field(ge=0)
    correction_fraction: float = Field(ge=0.0, le=1.0)


class DriftConfig(BaseModel):
    """Seeded SE(3) random-walk drift and loop-closure schedule."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    seed: int = Field(0, ge=0)
    sigma_t: float = Field(settings.DRIFT_SIGMA_T, ge=0, description="meters per step")
    sigma_r: float = Field(settings.DRIFT_SIGMA_R_DEG, ge=0, description="degrees per step")
    loop_closures: List[LoopClosure] = Field(default_factory=list)


class CameraConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    width: int = Field(settings.IMAGE_WIDTH, gt=0)
    height: int = Field(settings.IMAGE_HEIGHT, gt=0)
    fx: float = Field(settings.FOCAL_LENGTH, gt=0)
    fy: float = Field(settings.FOCAL_LENGTH, gt=0)
    cx: Optional[float] = None
    cy: Optional[float] = None

    def to_intrinsics(self) -> Intrinsics:
        cx = self.width / 2.0 if self.cx is None else self.cx
        cy = self.height / 2.0 if self.cy is None else self.cy
        return Intrinsics(fx=self.fx, fy=self.fy, cx=cx, cy=cy,
                          width=self.width, height=self.height)


class TrajectoryConfig(BaseModel):
    """Circular orbit with inward gaze."""

    model_config = ConfigDict(frozen=True, extra='forbid')

    frames: int = Field(settings.TRAJECTORY_FRAMES, gt=0)
    radius: float = Field(2.0, gt=0)
    height: float = Field(1.5, gt=0)
    target: Tuple[float, float, float] = (0.0, 0.0, 0.5)
    turns: float = Field(1.0, gt=0)


class SimulationConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    camera: CameraConfig = Field(default_factory=CameraConfig)
    trajectory: TrajectoryConfig = Field(default_factory=TrajectoryConfig)
    drift: DriftConfig = Field(default_factory=DriftConfig)
