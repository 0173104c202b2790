"""
Statistics of a dynamic pose stream: how far each camera's estimate travels
across all of its updates.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from config import settings
from models.geometry import translation_distance
from models.pose_stream import PoseStream


@dataclass
class StreamStats:
    """Per-frame total update distances and their clipped histogram."""

    totals: pd.Series
    update_counts: pd.Series
    histogram: pd.DataFrame
    bin_width: float
    clip: float

    @property
    def frame_count(self) -> int:
        return int(len(self.totals))

    def fraction_at_least(self, distance: float) -> float:
        if self.frame_count == 0:
            return 0.0
        return float((self.totals >= distance - settings.THRESHOLD_TOLERANCE).mean())

    @property
    def fraction_updated(self) -> float:
        if self.frame_count == 0:
            return 0.0
        return float((self.update_counts > 0).mean())

    def summary(self) -> Dict[str, Any]:
        return {
            'frames': self.frame_count,
            'update_events': int(self.update_counts.sum()),
            'fraction_updated': self.fraction_updated,
            'fraction_over_0_5m': self.fraction_at_least(0.5),
            'fraction_over_1m': self.fraction_at_least(1.0),
            'fraction_over_2m': self.fraction_at_least(2.0),
            'mean_total_m': float(self.totals.mean()) if self.frame_count else 0.0,
            'max_total_m': float(self.totals.max()) if self.frame_count else 0.0,
        }

    def save_histogram(self, path: Union[str, Path]) -> None:
        self.histogram.to_csv(path, index=False)


def update_distances(stream: PoseStream) -> pd.DataFrame:
    """
    Per frame, the sum of translation distances between consecutive pose
    estimates, and the number of update events.
    """
    last_pose = {}
    totals = {}
    counts = {}
    for event in stream:
        if event.is_new_frame:
            totals[event.frame_id] = 0.0
            counts[event.frame_id] = 0
        else:
            totals[event.frame_id] += translation_distance(last_pose[event.frame_id], event.pose)
            counts[event.frame_id] += 1
        last_pose[event.frame_id] = event.pose
    frame = pd.DataFrame({'total_m': pd.Series(totals, dtype=float),
                          'updates': pd.Series(counts, dtype=int)})
    frame.index.name = 'frame'
    return frame


def histogram(values: pd.Series, bin_width: float = settings.HISTOGRAM_BIN,
              clip: float = settings.HISTOGRAM_CLIP) -> pd.DataFrame:
    """
    Fixed-width histogram over [0, clip]; values at or above clip fall into
    the final bin.
    """
    n_bins = max(1, int(round(clip / bin_width)))
    index = np.floor(values.to_numpy(dtype=float) / bin_width + settings.THRESHOLD_TOLERANCE)
    index = np.clip(index, 0, n_bins - 1).astype(int)
    counts = pd.Series(index).value_counts().reindex(range(n_bins), fill_value=0)
    return pd.DataFrame({
        'bin_lower_m': np.round(np.arange(n_bins) * bin_width, 6),
        'count': counts.to_numpy(dtype=int),
    })


def stream_stats(stream: PoseStream, bin_width: float = settings.HISTOGRAM_BIN,
                 clip: float = settings.HISTOGRAM_CLIP) -> StreamStats:
    """
    Raises:
        StreamFormatError: If the stream is malformed
    """
    stream.validate()
    distances = update_distances(stream)
    return StreamStats(
        totals=distances['total_m'],
        update_counts=distances['updates'],
        histogram=histogram(distances['total_m'], bin_width, clip),
        bin_width=bin_width,
        clip=clip,
    )
