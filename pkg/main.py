#!/usr/bin/env python3
"""
Command-line entry point for the online reconstruction pipeline.

Sub-commands:
    simulate     render a synthetic scene and write a drifting pose stream
    reconstruct  apply one strategy to a stream and write checkpoint meshes
    evaluate     score checkpoint meshes against time-dependent ground truth
    stats        histogram of per-frame total update distance
    compare      run the three update strategies on one plan side by side
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from loguru import logger

from config import settings
from models.experiment_config import (
    CameraConfig, DriftConfig, ExperimentConfig, LoopClosure, SimulationConfig, TrajectoryConfig,
)
from models.geometry import Intrinsics
from models.mesh import TriangleMesh
from models.pose_stream import PoseStream
from models.scene import Scene
from services.error_handler import ErrorHandler, ExitCode, UsageError, error_handler_decorator
from services.experiment_runner import (
    COMPARED_STRATEGIES, Representation, Strategy, compare_strategies, run_experiment,
)
from services.frame_storage import DepthStore, file_digest
from services.metrics import GroundTruthBuilder, evaluate
from services.pose_filter import plan_actions
from services.report_writer import ReportWriter, check_checkpoints, find_checkpoints
from services.simulator import CAMERA_FILE, default_room_scene, load_intrinsics, run_simulation
from services.stream_stats import stream_stats

CONFIG_FLAGS = {
    'voxel_size': 'voxel_size',
    'bundle_size': 'bundle_size',
    'update_distance': 'update_distance',
    'inlier_threshold': 'inlier_threshold',
    'n_samples': 'n_samples',
    'threads': 'threads',
    'seed': 'seed',
}


class CliParser(argparse.ArgumentParser):
    """ArgumentParser raising UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help="JSON file with ExperimentConfig fields")
    parser.add_argument('--voxel-size', type=float)
    parser.add_argument('--bundle-size', type=int, help="keyframes per bundle (K)")
    parser.add_argument('--update-distance', type=float, help="drift threshold d, meters")
    parser.add_argument('--inlier-threshold', type=float)
    parser.add_argument('--n-samples', type=int, help="surface samples per mesh")
    parser.add_argument('--threads', type=int, help="cap on evaluation worker threads")
    parser.add_argument('--seed', type=int)


def build_parser() -> CliParser:
    parser = CliParser(prog='recon', description=__doc__,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--log-level', default=None, help="DEBUG, INFO, WARNING, ...")
    parser.add_argument('--log-file', type=Path, default=None)
    commands = parser.add_subparsers(dest='command', parser_class=CliParser)

    simulate = commands.add_parser('simulate', help="render a scene and write a pose stream")
    simulate.add_argument('--scene', type=Path, help="scene JSON (default: built-in room)")
    simulate.add_argument('--out', type=Path, required=True)
    simulate.add_argument('--seed', type=int, default=0)
    simulate.add_argument('--frames', type=int, default=settings.TRAJECTORY_FRAMES)
    simulate.add_argument('--drift-sigma-t', type=float, default=settings.DRIFT_SIGMA_T)
    simulate.add_argument('--drift-sigma-r', type=float, default=settings.DRIFT_SIGMA_R_DEG)
    simulate.add_argument('--loop-closure', action='append', default=None, metavar='T:FRACTION',
                          help="loop closure at tick T (default: one full correction at the end)")
    simulate.add_argument('--no-loop-closure', action='store_true')
    simulate.add_argument('--width', type=int, default=settings.IMAGE_WIDTH)
    simulate.add_argument('--height', type=int, default=settings.IMAGE_HEIGHT)

    reconstruct = commands.add_parser('reconstruct', help="apply a strategy to a stream")
    reconstruct.add_argument('--stream', type=Path, required=True)
    reconstruct.add_argument('--depth-dir', type=Path, required=True)
    reconstruct.add_argument('--out', type=Path, required=True)
    reconstruct.add_argument('--strategy', choices=[s.value for s in Strategy],
                             default=Strategy.DEINTEGRATE.value)
    reconstruct.add_argument('--representation', choices=[r.value for r in Representation],
                             default=Representation.TSDF.value)
    reconstruct.add_argument('--recompute-depth', action='store_true',
                             help="re-render depth at updated poses before re-integration")
    reconstruct.add_argument('--scene', type=Path, help="scene JSON, needed by --recompute-depth")
    _add_config_arguments(reconstruct)

    evaluate_cmd = commands.add_parser('evaluate', help="score checkpoint meshes")
    evaluate_cmd.add_argument('--pred-dir', type=Path, required=True)
    evaluate_cmd.add_argument('--stream', type=Path, required=True)
    evaluate_cmd.add_argument('--depth-dir', type=Path, required=True)
    evaluate_cmd.add_argument('--out', type=Path, required=True, help="per-checkpoint JSONL")
    evaluate_cmd.add_argument('--gt-dir', type=Path,
                              help="compare against another run's checkpoints instead")
    evaluate_cmd.add_argument('--strategy', default=None, help="label for the report rows")
    _add_config_arguments(evaluate_cmd)

    stats = commands.add_parser('stats', help="update-distance histogram of a stream")
    stats.add_argument('--stream', type=Path, required=True)
    stats.add_argument('--out', type=Path, required=True, help="histogram CSV")
    stats.add_argument('--bin-width', type=float, default=settings.HISTOGRAM_BIN)
    stats.add_argument('--clip', type=float, default=settings.HISTOGRAM_CLIP)

    compare = commands.add_parser('compare', help="run all update strategies on one plan")
    compare.add_argument('--stream', type=Path, required=True)
    compare.add_argument('--depth-dir', type=Path, required=True)
    compare.add_argument('--out', type=Path, required=True)
    compare.add_argument('--representation', choices=[r.value for r in Representation],
                         default=Representation.TSDF.value)
    _add_config_arguments(compare)
    return parser


def load_experiment_config(args: argparse.Namespace, **extra) -> ExperimentConfig:
    """Merge a --config file with explicit flags; flags win."""
    values: Dict[str, Any] = {}
    if getattr(args, 'config', None):
        values.update(json.loads(Path(args.config).read_text(encoding='utf-8')))
    for flag, field_name in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field_name] = value
    values.update({key: value for key, value in extra.items() if value is not None})
    return ExperimentConfig(**values)


def log_depth_store(store: DepthStore) -> None:
    stats = store.get_storage_stats()
    logger.info(f"Depth store {store.root}: {stats['frame_count']} frames, "
                f"{stats['total_size'] / 1e6:.1f} MB")


def load_camera(depth_dir: Path) -> Intrinsics:
    camera_file = Path(depth_dir) / CAMERA_FILE
    if camera_file.is_file():
        return load_intrinsics(camera_file)
    logger.warning(f"No {CAMERA_FILE} in {depth_dir}; using default intrinsics")
    return CameraConfig().to_intrinsics()


def _parse_loop_closures(args: argparse.Namespace) -> List[LoopClosure]:
    if args.no_loop_closure:
        return []
    if not args.loop_closure:
        return [LoopClosure(trigger_time=args.frames - 1, correction_fraction=1.0)]
    closures = []
    for value in args.loop_closure:
        try:
            tick, fraction = value.split(':')
            closures.append(LoopClosure(trigger_time=int(tick), correction_fraction=float(fraction)))
        except ValueError:
            raise UsageError(f"--loop-closure expects T:FRACTION, got {value!r}")
    return closures


def cmd_simulate(args: argparse.Namespace) -> int:
    scene = Scene.load(args.scene) if args.scene else default_room_scene()
    scene.validate()
    config = SimulationConfig(
        camera=CameraConfig(width=args.width, height=args.height),
        trajectory=TrajectoryConfig(frames=args.frames),
        drift=DriftConfig(seed=args.seed, sigma_t=args.drift_sigma_t, sigma_r=args.drift_sigma_r,
                          loop_closures=_parse_loop_closures(args)),
    )
    result = run_simulation(scene, config, show_progress=True)
    out_dir = result.save(args.out)
    (out_dir / 'scene.json').write_text(scene.to_json() + '\n', encoding='utf-8')
    ReportWriter(out_dir).write_run_metadata(
        'simulate', config.model_dump(mode='json'), args.seed,
        inputs={'scene': file_digest(args.scene) if args.scene else 'built-in room'})
    return ExitCode.SUCCESS


def cmd_reconstruct(args: argparse.Namespace) -> int:
    if args.recompute_depth and not args.scene:
        raise UsageError("--recompute-depth needs --scene")
    config = load_experiment_config(args, recompute_depth=args.recompute_depth or None)
    scene = Scene.load(args.scene) if args.scene else None
    stream = PoseStream.load(args.stream)
    store = DepthStore(args.depth_dir)
    store.check_frames(stream.frame_ids())
    log_depth_store(store)
    k = load_camera(args.depth_dir)
    strategy = Strategy(args.strategy)
    representation = Representation(args.representation)

    result = run_experiment(stream, store, k, strategy, representation, config, scene=scene,
                            evaluate_checkpoints=False)
    writer = ReportWriter(args.out)
    writer.write_checkpoint_meshes({c.time: c.predicted_mesh for c in result.checkpoints})
    writer.write_actions(result.applied)
    writer.write_timings(result.applied)
    result.volume.save_snapshot(args.out / f"volume_{representation.value}.bin")
    writer.write_run_metadata(
        'reconstruct', config.model_dump(mode='json'), config.seed,
        inputs={'stream': file_digest(args.stream), 'depth': store.digest()},
        extra={'strategy': strategy.value, 'representation': representation.value,
               'checkpoints': [c.time for c in result.checkpoints]})
    for key, value in result.timing_summary().items():
        logger.info(f"{key}: {value:.1f}")
    return ExitCode.SUCCESS


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_experiment_config(args)
    stream = PoseStream.load(args.stream)
    store = DepthStore(args.depth_dir)
    k = load_camera(args.depth_dir)
    plan = plan_actions(stream, config)
    ticks = plan.checkpoint_ticks()
    predicted = find_checkpoints(args.pred_dir)
    check_checkpoints(ticks, predicted)

    label = args.strategy
    run_file = Path(args.pred_dir) / 'run.json'
    if label is None and run_file.is_file():
        label = json.loads(run_file.read_text(encoding='utf-8')).get('strategy')
    label = label or 'unknown'

    if args.gt_dir:
        references = find_checkpoints(args.gt_dir)
        check_checkpoints(ticks, references)
        gt_meshes = {t: TriangleMesh.load_ply(references[t]) for t in ticks}
    else:
        builder = GroundTruthBuilder(store, k, config)
        poses = stream.estimates_at(ticks)
        frame_times = stream.first_seen()
        gt_meshes = {t: builder.build(t, poses[t], frame_times) for t in ticks}

    records = []
    for t in ticks:
        report = evaluate(TriangleMesh.load_ply(predicted[t]), gt_meshes[t],
                          config.inlier_threshold, config.n_samples, config.clip_distance,
                          seed=config.seed, gt_seed=config.seed + 1)
        if report is None:
            logger.warning(f"Skipping checkpoint t={t}: ground truth is empty")
            continue
        records.append({'t': t, 'strategy': label, **report.to_dict()})
        logger.info(f"t={t}: fscore {report.fscore:.3f}, chamfer {report.chamfer:.4f}m")

    out = Path(args.out)
    writer = ReportWriter(out.parent)
    writer.write_reports(records, out.name)
    writer.write_aggregate_csv(records, out.with_suffix('.csv').name)
    inputs = {'stream': file_digest(args.stream), 'depth': store.digest()}
    if args.gt_dir:
        inputs['ground_truth'] = args.gt_dir.name
    writer.write_run_metadata(
        'evaluate', config.model_dump(mode='json'), config.seed, inputs,
        extra={'strategy': label, 'checkpoints': ticks}, name=f'{out.stem}.run.json')
    return ExitCode.SUCCESS


def cmd_stats(args: argparse.Namespace) -> int:
    config = ExperimentConfig(histogram_bin=args.bin_width, histogram_clip=args.clip)
    stream = PoseStream.load(args.stream)
    stats = stream_stats(stream, config.histogram_bin, config.histogram_clip)
    out = Path(args.out)
    writer = ReportWriter(out.parent)
    stats.save_histogram(out)
    summary = stats.summary()
    out.with_suffix('.summary.json').write_text(
        json.dumps(summary, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    writer.write_run_metadata('stats', config.model_dump(mode='json'), config.seed,
                              {'stream': file_digest(args.stream)}, name=f'{out.stem}.run.json')
    print(json.dumps(summary, sort_keys=True))
    return ExitCode.SUCCESS


def cmd_compare(args: argparse.Namespace) -> int:
    config = load_experiment_config(args)
    stream = PoseStream.load(args.stream)
    store = DepthStore(args.depth_dir)
    store.check_frames(stream.frame_ids())
    log_depth_store(store)
    k = load_camera(args.depth_dir)
    representation = Representation(args.representation)

    results = compare_strategies(stream, store, k, representation, config, show_progress=True)
    records, summary = [], []
    for strategy in COMPARED_STRATEGIES:
        result = results[strategy]
        rows = [entry.to_dict(strategy) for entry in result.results if entry.report is not None]
        records.extend(rows)
        if rows:
            summary.append(rows[-1])
    writer = ReportWriter(args.out)
    writer.write_reports(records)
    writer.write_aggregate_csv(records)
    writer.write_strategy_summary(summary)
    writer.write_run_metadata(
        'compare', config.model_dump(mode='json'), config.seed,
        inputs={'stream': file_digest(args.stream), 'depth': store.digest()},
        extra={'representation': representation.value})
    return ExitCode.SUCCESS


COMMANDS = {
    'simulate': cmd_simulate,
    'reconstruct': cmd_reconstruct,
    'evaluate': cmd_evaluate,
    'stats': cmd_stats,
    'compare': cmd_compare,
}


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return the process exit code."""
    handler = ErrorHandler()
    try:
        args = build_parser().parse_args(argv)
        settings.configure_logging(args.log_level, args.log_file)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        command = error_handler_decorator(
            handler, context_func=lambda parsed: {'command': parsed.command})(COMMANDS[args.command])
        return int(command(args))
    except Exception as e:
        info = getattr(e, 'error_info', None) or handler.handle_error(e, {'argv': argv})
        print(f"error: {info.user_message}: {info.message}", file=sys.stderr)
        return int(handler.exit_code_for(e))


if __name__ == "__main__":
    sys.exit(run_cli())
