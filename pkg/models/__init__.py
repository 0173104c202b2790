# Data models for the online reconstruction pipeline

from .geometry import DepthImage, GeometryError, Intrinsics, Pose
from .pose_stream import PoseEvent, PoseStream, StreamFormatError
from .bundle import ActionType, Bundle, ReconAction
from .scene import Box, Plane, Scene, SceneFormatError, Sphere
from .mesh import TriangleMesh
from .feature_map import FeatureMap
from .experiment_config import (
    CameraConfig, DriftConfig, ExperimentConfig, LoopClosure, SimulationConfig, TrajectoryConfig,
)

__all__ = [
    'DepthImage',
    'GeometryError',
    'Intrinsics',
    'Pose',
    'PoseEvent',
    'PoseStream',
    'StreamFormatError',
    'ActionType',
    'Bundle',
    'ReconAction',
    'Box',
    'Plane',
    'Scene',
    'SceneFormatError',
    'Sphere',
    'TriangleMesh',
    'FeatureMap',
    'CameraConfig',
    'DriftConfig',
    'ExperimentConfig',
    'LoopClosure',
    'SimulationConfig',
    'TrajectoryConfig',
]
