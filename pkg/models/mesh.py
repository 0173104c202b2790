"""
Triangle meshes and ASCII PLY input/output.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import trimesh


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices in world meters, triangles as vertex-index triples."""

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if np.any(~np.isfinite(vertices)):
            raise ValueError("Mesh vertices must be finite")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError("Triangle index out of range")
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'triangles', triangles)

    @classmethod
    def empty(cls) -> 'TriangleMesh':
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def to_trimesh(self) -> trimesh.Trimesh:
        return trimesh.Trimesh(vertices=self.vertices, faces=self.triangles, process=False)

    def scaled(self, factor: float) -> 'TriangleMesh':
        return TriangleMesh(self.vertices * factor, self.triangles)

    def to_ply(self) -> str:
        """ASCII PLY text with float vertices and a vertex_indices face list."""
        lines = [
            'ply',
            'format ascii 1.0',
            f'element vertex {len(self.vertices)}',
            'property float x',
            'property float y',
            'property float z',
            f'element face {len(self.triangles)}',
            'property list uchar int vertex_indices',
            'end_header',
        ]
        lines.extend(f'{x:.6f} {y:.6f} {z:.6f}' for x, y, z in self.vertices)
        lines.extend(f'3 {a} {b} {c}' for a, b, c in self.triangles)
        return '\n'.join(lines) + '\n'

    def save_ply(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_ply(), encoding='ascii')

    @classmethod
    def load_ply(cls, path: Union[str, Path]) -> 'TriangleMesh':
        path = Path(path)
        with open(path, 'r', encoding='ascii') as handle:
            for line in handle:
                if line.startswith('element vertex'):
                    if int(line.split()[-1]) == 0:
                        return cls.empty()
                    break
        loaded = trimesh.load(str(path), file_type='ply', process=False, force='mesh')
        return cls(np.asarray(loaded.vertices), np.asarray(loaded.faces))
