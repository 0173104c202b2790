"""
Analytic signed-distance scenes used by the simulator.

A scene is the union (pointwise minimum) of spheres, boxes and planes. All
distances are in meters and negative inside geometry.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np


class SceneFormatError(ValueError):
    """Raised when a scene file cannot be parsed or is invalid."""

    def __init__(self, message: str, line: int = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _vector(values: Sequence[float], name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.shape != (3,) or not np.all(np.isfinite(vector)):
        raise SceneFormatError(f"'{name}' must be three finite numbers")
    return vector


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = _vector(self.center, 'center')
        if not self.radius > 0:
            raise SceneFormatError("sphere radius must be positive")

    def sdf(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points - self.center, axis=-1) - self.radius

    def to_dict(self) -> Dict[str, Any]:
        return {'type': 'sphere', 'center': self.center.tolist(), 'radius': self.radius}


@dataclass
class Box:
    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        self.center = _vector(self.center, 'center')
        self.half_extents = _vector(self.half_extents, 'half_extents')
        if np.any(self.half_extents <= 0):
            raise SceneFormatError("box half_extents must be positive")

    def sdf(self, points: np.ndarray) -> np.ndarray:
        q = np.abs(points - self.center) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def to_dict(self) -> Dict[str, Any]:
        return {'type': 'box', 'center': self.center.tolist(),
                'half_extents': self.half_extents.tolist()}


@dataclass
class Plane:
    """Half-space {x : n.x <= offset} with unit normal n pointing outward."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = _vector(self.normal, 'normal')
        length = np.linalg.norm(normal)
        if length == 0:
            raise SceneFormatError("plane normal must be non-zero")
        self.normal = normal / length

    def sdf(self, points: np.ndarray) -> np.ndarray:
        return points @ self.normal - self.offset

    def to_dict(self) -> Dict[str, Any]:
        return {'type': 'plane', 'normal': self.normal.tolist(), 'offset': self.offset}


Primitive = Union[Sphere, Box, Plane]

PRIMITIVE_TYPES = {
    'sphere': (Sphere, ('center', 'radius')),
    'box': (Box, ('center', 'half_extents')),
    'plane': (Plane, ('normal', 'offset')),
}


@dataclass
class Scene:
    """Union of analytic primitives."""

    primitives: List[Primitive] = field(default_factory=list)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Vectorized signed distance for an (..., 3) array of points."""
        points = np.asarray(points, dtype=np.float64)
        distance = np.full(points.shape[:-1], np.inf)
        for primitive in self.primitives:
            distance = np.minimum(distance, primitive.sdf(points))
        return distance

    def validate(self) -> None:
        if not self.primitives:
            raise SceneFormatError("scene must contain at least one primitive")

    def to_dict(self) -> Dict[str, Any]:
        return {'primitives': [primitive.to_dict() for primitive in self.primitives]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Scene':
        if not isinstance(data, dict) or not isinstance(data.get('primitives'), list):
            raise SceneFormatError("scene must be an object with a 'primitives' list")
        primitives = []
        for index, entry in enumerate(data['primitives']):
            kind = entry.get('type') if isinstance(entry, dict) else None
            if kind not in PRIMITIVE_TYPES:
                raise SceneFormatError(f"primitive {index}: unknown type {kind!r}")
            primitive_cls, field_names = PRIMITIVE_TYPES[kind]
            missing = [name for name in field_names if name not in entry]
            if missing:
                raise SceneFormatError(f"primitive {index}: missing fields {missing}")
            try:
                primitives.append(primitive_cls(**{name: entry[name] for name in field_names}))
            except (TypeError, ValueError) as e:
                raise SceneFormatError(f"primitive {index}: {e}")
        scene = cls(primitives)
        scene.validate()
        return scene

    @classmethod
    def from_json(cls, text: str) -> 'Scene':
        """
        Parse a scene file.

        Raises:
            SceneFormatError: With the offending line number for syntax errors
        """
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise SceneFormatError(e.msg, line=e.lineno)
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'Scene':
        return cls.from_json(Path(path).read_text(encoding='utf-8'))


def scene_sdf(scene: Scene, point: Sequence[float]) -> float:
    """Signed distance from a point to the nearest scene surface."""
    return float(scene.sdf(np.asarray(point, dtype=np.float64)))
