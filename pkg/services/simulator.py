"""
SLAM and depth-sensor simulator.

Renders depth from analytic SDF scenes at the TRUE camera poses and emits a
dynamic pose stream whose estimates follow a seeded SE(3) random-walk drift,
with loop closures that pull past estimates back toward ground truth.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from loguru import logger
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from config import settings
from models.experiment_config import (
    DriftConfig, LoopClosure, SimulationConfig, TrajectoryConfig,
)
from models.geometry import (
    DepthImage, Intrinsics, Pose, compose, interpolate_toward, inverse, look_at, pixel_rays,
)
from models.pose_stream import PoseEvent, PoseStream
from models.scene import Box, Scene
from services.frame_storage import DepthStore

STREAM_FILE = "stream.jsonl"
TRAJECTORY_FILE = "trajectory.jsonl"
CAMERA_FILE = "camera.json"


def default_room_scene() -> Scene:
    """Floor slab and four pieces of furniture inside a 6 x 6 x 3 m room."""
    floor_top = 0.1
    return Scene([
        Box(center=(0.0, 0.0, floor_top / 2), half_extents=(3.0, 3.0, floor_top / 2)),
        Box(center=(0.0, 0.0, floor_top + 0.375), half_extents=(0.6, 0.4, 0.375)),
        Box(center=(0.9, -0.8, floor_top + 0.2), half_extents=(0.25, 0.25, 0.2)),
        Box(center=(-0.9, 0.7, floor_top + 0.5), half_extents=(0.2, 0.45, 0.5)),
        Box(center=(0.8, 0.9, floor_top + 0.6), half_extents=(0.15, 0.15, 0.6)),
    ])


def orbit_trajectory(config: Optional[TrajectoryConfig] = None) -> List[Pose]:
    """Circular orbit around the target, one pose per tick, gazing inward."""
    config = config or TrajectoryConfig()
    poses = []
    for t in range(config.frames):
        angle = 2.0 * np.pi * config.turns * t / config.frames
        eye = (config.radius * np.cos(angle), config.radius * np.sin(angle), config.height)
        poses.append(look_at(eye, config.target))
    return poses


def render_depth(scene: Scene, cam_pose: Pose, k: Intrinsics,
                 max_range: float = settings.MAX_RANGE,
                 epsilon: float = settings.TRACE_EPSILON,
                 max_steps: int = settings.TRACE_MAX_STEPS) -> DepthImage:
    """
    Sphere-trace every pixel ray and return z-depth; misses are 0 (invalid).

    Steps by the unsigned scene distance, so surfaces are found from either
    side of a primitive.
    """
    rays = pixel_rays(k).reshape(-1, 3)
    ray_norm = np.linalg.norm(rays, axis=1)
    directions = cam_pose.rotation @ (rays / ray_norm[:, None]).T
    directions = directions.T
    origin = cam_pose.translation

    distance = np.zeros(len(rays))
    hit = np.zeros(len(rays), dtype=bool)
    active = np.arange(len(rays))
    for _ in range(max_steps):
        if active.size == 0:
            break
        points = origin + distance[active, None] * directions[active]
        step = np.abs(scene.sdf(points))
        converged = step < epsilon
        hit[active[converged]] = True
        distance[active] += np.where(converged, 0.0, step)
        active = active[~converged & (distance[active] <= max_range)]

    hit &= distance <= max_range
    depth = np.where(hit, distance / ray_norm, 0.0)
    return DepthImage(width=k.width, height=k.height, data=depth.reshape(k.height, k.width))


def _drift_step(rng: np.random.Generator, config: DriftConfig) -> Pose:
    translation = rng.normal(0.0, config.sigma_t, size=3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.normal(0.0, config.sigma_r))
    return Pose(Rotation.from_rotvec(axis * angle).as_matrix(), translation)


@dataclass
class SimulationResult:
    """Stream, true-pose depth frames and ground-truth trajectory of one run."""

    stream: PoseStream
    depths: Dict[int, DepthImage]
    trajectory: List[Pose]
    intrinsics: Intrinsics
    estimates: Dict[int, Pose] = field(default_factory=dict)

    def save(self, out_dir: Union[str, Path]) -> Path:
        """Write frame_<t>.dpt files, stream.jsonl, trajectory.jsonl and camera.json."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        store = DepthStore(out_dir, cache=False)
        for frame_id in sorted(self.depths):
            store.write(frame_id, self.depths[frame_id])
        self.stream.save(out_dir / STREAM_FILE)
        save_trajectory(out_dir / TRAJECTORY_FILE, self.trajectory)
        save_intrinsics(out_dir / CAMERA_FILE, self.intrinsics)
        logger.info(f"Wrote {len(self.depths)} depth frames and "
                    f"{len(self.stream)} pose events to {out_dir}")
        return out_dir


def simulate_stream(scene: Scene, trajectory: List[Pose], drift: DriftConfig,
                    k: Intrinsics, render: bool = True,
                    show_progress: bool = False) -> SimulationResult:
    """
    Produce the dynamic pose stream, and depth rendered from the true poses.

    At tick t frame t is announced with estimate drift(t) o true(t), where
    drift(0) is the identity and drift(t) = step(t) o drift(t - 1). A loop
    closure at tick T moves every estimate of frames <= T toward its true
    pose by the correction fraction and emits an update for each frame whose
    estimate changed; drift then continues from the corrected frame T.

    Raises:
        ValueError: If the trajectory is empty
    """
    if not trajectory:
        raise ValueError("trajectory must contain at least one pose")
    closures: Dict[int, List[LoopClosure]] = {}
    for closure in drift.loop_closures:
        if closure.trigger_time >= len(trajectory):
            logger.warning(f"Ignoring loop closure at t={closure.trigger_time}, "
                           f"beyond the last frame {len(trajectory) - 1}")
            continue
        closures.setdefault(closure.trigger_time, []).append(closure)

    rng = np.random.default_rng(drift.seed)
    drift_pose = Pose.identity()
    estimates: Dict[int, Pose] = {}
    events: List[PoseEvent] = []
    depths: Dict[int, DepthImage] = {}

    ticks = range(len(trajectory))
    for t in tqdm(ticks, desc="Simulating", disable=not show_progress):
        if t > 0:
            drift_pose = compose(_drift_step(rng, drift), drift_pose)
        estimates[t] = compose(drift_pose, trajectory[t])
        events.append(PoseEvent(time=t, frame_id=t, pose=estimates[t], is_new_frame=True))
        if render:
            depths[t] = render_depth(scene, trajectory[t], k)

        for closure in closures.get(t, []):
            corrected = 0
            for frame in range(t + 1):
                updated = interpolate_toward(estimates[frame], trajectory[frame],
                                             closure.correction_fraction)
                if updated != estimates[frame]:
                    estimates[frame] = updated
                    events.append(PoseEvent(time=t, frame_id=frame, pose=updated,
                                            is_new_frame=False))
                    corrected += 1
            drift_pose = compose(estimates[t], inverse(trajectory[t]))
            logger.info(f"Loop closure at t={t} corrected {corrected} frames "
                        f"(fraction {closure.correction_fraction})")

    stream = PoseStream(events)
    logger.info(f"Simulated {len(trajectory)} frames with {stream.update_count()} pose updates")
    return SimulationResult(stream=stream, depths=depths, trajectory=list(trajectory),
                            intrinsics=k, estimates=estimates)


def default_simulation_config(seed: int = 0, frames: int = settings.TRAJECTORY_FRAMES,
                              sigma_t: float = settings.DRIFT_SIGMA_T,
                              sigma_r: float = settings.DRIFT_SIGMA_R_DEG) -> SimulationConfig:
    """Desk-scale defaults: one full-correction loop closure at the last tick."""
    return SimulationConfig(
        trajectory=TrajectoryConfig(frames=frames),
        drift=DriftConfig(seed=seed, sigma_t=sigma_t, sigma_r=sigma_r,
                          loop_closures=[LoopClosure(trigger_time=frames - 1,
                                                     correction_fraction=1.0)]),
    )


def run_simulation(scene: Scene, config: Optional[SimulationConfig] = None,
                   show_progress: bool = False) -> SimulationResult:
    config = config or default_simulation_config()
    scene.validate()
    return simulate_stream(scene, orbit_trajectory(config.trajectory), config.drift,
                           config.camera.to_intrinsics(), show_progress=show_progress)


def save_trajectory(path: Union[str, Path], trajectory: List[Pose]) -> None:
    lines = [json.dumps({'t': t, 'pose': pose.to_list()}) for t, pose in enumerate(trajectory)]
    Path(path).write_text(''.join(line + '\n' for line in lines), encoding='utf-8')


def load_trajectory(path: Union[str, Path]) -> List[Pose]:
    poses = {}
    for line in Path(path).read_text(encoding='utf-8').splitlines():
        if line.strip():
            record = json.loads(line)
            poses[int(record['t'])] = Pose.from_list(record['pose'])
    return [poses[t] for t in sorted(poses)]


def save_intrinsics(path: Union[str, Path], k: Intrinsics) -> None:
    Path(path).write_text(json.dumps(k.to_dict(), indent=2) + '\n', encoding='utf-8')


def load_intrinsics(path: Union[str, Path]) -> Intrinsics:
    data = json.loads(Path(path).read_text(encoding='utf-8'))
    return Intrinsics(fx=float(data['fx']), fy=float(data['fy']), cx=float(data['cx']),
                      cy=float(data['cy']), width=int(data['width']), height=int(data['height']))
