"""
Depth frame storage for simulated and recorded sequences.

Frames are DPT1 files named frame_<t>.dpt: the magic bytes "DPT1", u32 width,
u32 height, then width*height little-endian float32 depths in meters,
row-major, with 0.0 marking invalid pixels.
"""

import hashlib
import struct
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from loguru import logger

from models.geometry import DepthImage

DEPTH_MAGIC = b'DPT1'
HEADER_SIZE = 12
FRAME_PATTERN = "frame_{}.dpt"


class DepthFormatError(ValueError):
    """Raised when a depth file is truncated or has the wrong header."""
    pass


class MissingFrameError(FileNotFoundError):
    """Raised when the stream references a frame with no depth file."""

    def __init__(self, frame_id: int, path: Optional[Path] = None):
        self.frame_id = frame_id
        self.path = path
        super().__init__(f"Depth frame {frame_id} not found" + (f" at {path}" if path else ""))


def encode_depth(depth: DepthImage) -> bytes:
    data = np.where(depth.valid_mask(), depth.data, 0.0).astype('<f4')
    return DEPTH_MAGIC + struct.pack('<2I', depth.width, depth.height) + data.tobytes()


def decode_depth(blob: bytes) -> DepthImage:
    """
    Raises:
        DepthFormatError: On a bad magic or a payload of the wrong size
    """
    if len(blob) < HEADER_SIZE or blob[:4] != DEPTH_MAGIC:
        raise DepthFormatError(f"Not a DPT1 depth file (header {blob[:4]!r})")
    width, height = struct.unpack_from('<2I', blob, 4)
    expected = HEADER_SIZE + 4 * width * height
    if len(blob) != expected:
        raise DepthFormatError(f"Depth file is {len(blob)} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype='<f4', offset=HEADER_SIZE).reshape(height, width)
    return DepthImage(width=width, height=height, data=data)


def write_depth(path: Union[str, Path], depth: DepthImage) -> None:
    Path(path).write_bytes(encode_depth(depth))


def read_depth(path: Union[str, Path]) -> DepthImage:
    return decode_depth(Path(path).read_bytes())


def file_digest(path: Union[str, Path]) -> str:
    """SHA-256 hex digest of a file."""
    hash_sha256 = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b""):
            hash_sha256.update(chunk)
    return hash_sha256.hexdigest()


class DepthStore:
    """Directory of per-frame depth files, with an optional read cache."""

    def __init__(self, root: Union[str, Path], cache: bool = True):
        self.root = Path(root)
        self.cache_enabled = cache
        self._cache: Dict[int, DepthImage] = {}

    def path_for(self, frame_id: int) -> Path:
        return self.root / FRAME_PATTERN.format(frame_id)

    def write(self, frame_id: int, depth: DepthImage) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(frame_id)
        write_depth(path, depth)
        if self.cache_enabled:
            self._cache[frame_id] = depth
        return path

    def read(self, frame_id: int) -> DepthImage:
        """
        Raises:
            MissingFrameError: If frame_<t>.dpt does not exist
            DepthFormatError: If the file is corrupted
        """
        if frame_id in self._cache:
            return self._cache[frame_id]
        path = self.path_for(frame_id)
        if not path.is_file():
            raise MissingFrameError(frame_id, path)
        depth = read_depth(path)
        if self.cache_enabled:
            self._cache[frame_id] = depth
        return depth

    def __getitem__(self, frame_id: int) -> DepthImage:
        return self.read(frame_id)

    def __contains__(self, frame_id: int) -> bool:
        return frame_id in self._cache or self.path_for(frame_id).is_file()

    def frame_ids(self) -> List[int]:
        ids = []
        for path in self.root.glob("frame_*.dpt"):
            try:
                ids.append(int(path.stem.split('_', 1)[1]))
            except ValueError:
                logger.warning(f"Ignoring unexpected file {path.name}")
        return sorted(ids)

    def check_frames(self, frame_ids: List[int]) -> None:
        """
        Raises:
            MissingFrameError: For the first referenced frame without a file
        """
        for frame_id in frame_ids:
            if frame_id not in self:
                raise MissingFrameError(frame_id, self.path_for(frame_id))

    def digest(self) -> str:
        """Combined SHA-256 over all frame files in frame order."""
        combined = hashlib.sha256()
        for frame_id in self.frame_ids():
            combined.update(f"{frame_id}:{file_digest(self.path_for(frame_id))}\n".encode())
        return combined.hexdigest()

    def get_storage_stats(self) -> Dict[str, int]:
        files = list(self.root.glob("frame_*.dpt"))
        return {
            'frame_count': len(files),
            'total_size': sum(path.stat().st_size for path in files),
        }
