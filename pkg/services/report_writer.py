"""
Run outputs: checkpoint meshes, action logs, per-checkpoint metric reports,
aggregate CSV tables and the run metadata file.

Everything except timing data is written deterministically so that reruns
with the same inputs produce byte-identical files.
"""
import json
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import pandas as pd
from loguru import logger

from config import settings
from models.mesh import TriangleMesh
from services.action_worker import AppliedAction

CHECKPOINT_PATTERN = re.compile(r"^checkpoint_(\d+)\.ply$")
METRIC_COLUMNS = ['t', 'strategy', 'accuracy', 'completeness', 'chamfer',
                  'precision', 'recall', 'fscore']


class CheckpointMismatchError(ValueError):
    """Raised when predicted checkpoints do not match the expected set."""

    def __init__(self, message: str, missing: Iterable[int] = (), unexpected: Iterable[int] = ()):
        self.missing = sorted(missing)
        self.unexpected = sorted(unexpected)
        details = []
        if self.missing:
            details.append(f"missing {self.missing}")
        if self.unexpected:
            details.append(f"unexpected {self.unexpected}")
        super().__init__(f"{message}: {'; '.join(details)}" if details else message)


def _write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        for record in records:
            handle.write(json.dumps(record) + '\n')


def read_jsonl(path: Union[str, Path]) -> List[Dict[str, Any]]:
    lines = Path(path).read_text(encoding='utf-8').splitlines()
    return [json.loads(line) for line in lines if line.strip()]


class ReportWriter:
    """Writes the files of one run into an output directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def checkpoint_path(self, time: int) -> Path:
        return self.out_dir / f"checkpoint_{time}.ply"

    def write_checkpoint_meshes(self, meshes: Dict[int, TriangleMesh]) -> List[Path]:
        paths = []
        for time in sorted(meshes):
            path = self.checkpoint_path(time)
            meshes[time].save_ply(path)
            paths.append(path)
        logger.info(f"Wrote {len(paths)} checkpoint meshes to {self.out_dir}")
        return paths

    def write_actions(self, applied: List[AppliedAction]) -> Path:
        """actions.jsonl: every applied action in order, without timing."""
        path = self.out_dir / "actions.jsonl"
        _write_jsonl(path, (entry.action.to_dict() for entry in applied))
        return path

    def write_timings(self, applied: List[AppliedAction]) -> Path:
        path = self.out_dir / "timings.csv"
        frame = pd.DataFrame(
            [{'action': entry.action.kind.value, 'bundle': entry.action.bundle_id,
              't': entry.action.time, 'elapsed_ms': round(entry.elapsed_ms, 3)}
             for entry in applied],
            columns=['action', 'bundle', 't', 'elapsed_ms'])
        frame.to_csv(path, index=False)
        return path

    def write_reports(self, records: List[Dict[str, Any]], name: str = "reports.jsonl") -> Path:
        """One JSON object per checkpoint."""
        path = self.out_dir / name
        _write_jsonl(path, records)
        return path

    def write_aggregate_csv(self, records: List[Dict[str, Any]],
                            name: str = "metrics.csv") -> Path:
        path = self.out_dir / name
        frame = pd.DataFrame(records).reindex(columns=METRIC_COLUMNS)
        frame.to_csv(path, index=False, float_format='%.6f')
        return path

    def write_strategy_summary(self, records: List[Dict[str, Any]],
                               name: str = "strategy_summary.csv") -> Path:
        """Final-checkpoint metrics, one row per strategy."""
        path = self.out_dir / name
        pd.DataFrame(records).reindex(columns=METRIC_COLUMNS).to_csv(
            path, index=False, float_format='%.6f')
        return path

    def write_run_metadata(self, command: str, config: Dict[str, Any], seed: int,
                           inputs: Dict[str, str], extra: Optional[Dict[str, Any]] = None,
                           name: str = "run.json") -> Path:
        """run.json: command, config, seed, input digests and version."""
        metadata = {
            'command': command,
            'version': settings.VERSION,
            'seed': seed,
            'config': config,
            'inputs': inputs,
        }
        if extra:
            metadata.update(extra)
        path = self.out_dir / name
        path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + '\n', encoding='utf-8')
        return path


def find_checkpoints(pred_dir: Union[str, Path]) -> Dict[int, Path]:
    """Map tick to checkpoint_<t>.ply path for a prediction directory."""
    found = {}
    for path in Path(pred_dir).iterdir():
        match = CHECKPOINT_PATTERN.match(path.name)
        if match:
            found[int(match.group(1))] = path
    return dict(sorted(found.items()))


def check_checkpoints(expected: Iterable[int], found: Iterable[int]) -> None:
    """
    Raises:
        CheckpointMismatchError: If the sets differ or no checkpoint exists
    """
    expected, found = set(expected), set(found)
    if not found:
        raise CheckpointMismatchError("No checkpoint meshes found", missing=expected)
    if expected != found:
        raise CheckpointMismatchError("Checkpoint sets differ",
                                      missing=expected - found, unexpected=found - expected)
