"""
Per-pixel feature maps produced by a feature extractor.
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Row-major F-channel features stored as a (height, width, channels) array."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.size != self.width * self.height * self.channels:
            raise ValueError(
                f"Feature data has {data.size} values, expected "
                f"{self.width * self.height * self.channels}"
            )
        data = data.reshape(self.height, self.width, self.channels).copy()
        if not np.all(np.isfinite(data)):
            raise ValueError("Feature values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, 'data', data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None
