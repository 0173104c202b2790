"""
Reconstruction worker applying planned actions to a volume.

Actions arrive through an ordered queue and are applied strictly in emitted
order on a single thread, so the planner and the volume never share state.
"""

import queue
import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Union

from loguru import logger

from models.bundle import ActionType, ReconAction
from models.geometry import Intrinsics
from processors.base import VoxelVolume

ACTION_SIGNS = {
    ActionType.INTEGRATE: 1,
    ActionType.REINTEGRATE: 1,
    ActionType.DEINTEGRATE: -1,
}


@dataclass(frozen=True)
class CheckpointMarker:
    """Requests a callback with the volume once every earlier action is applied."""
    time: int


@dataclass(frozen=True)
class ResetMarker:
    """Clears the volume back to its empty state."""
    time: int


WorkItem = Union[ReconAction, CheckpointMarker, ResetMarker]
PayloadSource = Callable[[ReconAction], Mapping[int, Any]]

_STOP = object()


@dataclass
class AppliedAction:
    action: ReconAction
    elapsed_ms: float

    def to_dict(self) -> Dict[str, Any]:
        record = self.action.to_dict()
        record['elapsed_ms'] = round(self.elapsed_ms, 3)
        return record


class ReconstructionWorker:
    """Single worker thread owning a voxel volume."""

    def __init__(self, volume: VoxelVolume, payload_source: PayloadSource, k: Intrinsics,
                 on_checkpoint: Optional[Callable[[int, VoxelVolume], None]] = None,
                 worker_id: str = None):
        self.volume = volume
        self.payload_source = payload_source
        self.k = k
        self.on_checkpoint = on_checkpoint
        self.worker_id = worker_id or f"worker_{int(time.time())}"
        self.queue: "queue.Queue[Any]" = queue.Queue()
        self.applied: List[AppliedAction] = []
        self.error: Optional[BaseException] = None
        self.running = False
        self.current_item: Optional[WorkItem] = None
        self.thread: Optional[threading.Thread] = None

    def start(self, daemon: bool = True) -> None:
        if self.running:
            logger.warning(f"Worker {self.worker_id} is already running")
            return
        self.running = True
        self.thread = threading.Thread(target=self._run_worker, daemon=daemon)
        self.thread.start()
        logger.debug(f"Started worker {self.worker_id}")

    def submit(self, item: WorkItem) -> None:
        self.queue.put(item)

    def stop(self) -> None:
        """Ask the worker to finish the queued items and exit."""
        self.queue.put(_STOP)

    def join(self, timeout: Optional[float] = None) -> None:
        """
        Wait for the worker to drain the queue.

        Raises:
            The exception that stopped the worker, if any
        """
        if self.thread is not None:
            self.thread.join(timeout)
        if self.error is not None:
            raise self.error

    def apply(self, item: WorkItem) -> None:
        """Apply one item on the calling thread."""
        if isinstance(item, CheckpointMarker):
            if self.on_checkpoint is not None:
                self.on_checkpoint(item.time, self.volume)
            return
        if isinstance(item, ResetMarker):
            self.volume.clear()
            return
        started = time.perf_counter()
        payloads = self.payload_source(item)
        self.volume.integrate_bundle(payloads, item.snapshot(), self.k, ACTION_SIGNS[item.kind])
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        self.applied.append(AppliedAction(item, elapsed_ms))
        logger.debug(f"{item.kind.value} bundle {item.bundle_id} at t={item.time} "
                     f"({len(item.frame_ids)} frames) in {elapsed_ms:.1f}ms")

    def _run_worker(self) -> None:
        while True:
            item = self.queue.get()
            if item is _STOP:
                break
            if self.error is not None:
                continue
            self.current_item = item
            try:
                self.apply(item)
            except Exception as e:
                logger.error(f"Worker {self.worker_id} failed on {item}: {e}")
                self.error = e
            finally:
                self.current_item = None
        self.running = False
        logger.debug(f"Worker {self.worker_id} stopped")

    def get_status(self) -> Dict[str, Any]:
        return {
            'worker_id': self.worker_id,
            'running': self.running,
            'applied': len(self.applied),
            'pending': self.queue.qsize(),
            'failed': self.error is not None,
            'thread_alive': self.thread.is_alive() if self.thread else False,
        }
