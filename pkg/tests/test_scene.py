"""
Tests for analytic SDF scenes and scene files.
"""

import unittest

import numpy as np

from models.scene import Box, Plane, Scene, SceneFormatError, Sphere, scene_sdf


class TestSceneSdf(unittest.TestCase):
    """Test signed distances of primitives and their union."""

    def setUp(self):
        self.unit_sphere = Scene([Sphere(center=(0, 0, 0), radius=0.5)])

    def test_sphere_distances(self):
        self.assertAlmostEqual(scene_sdf(self.unit_sphere, (1, 0, 0)), 0.5)
        self.assertAlmostEqual(scene_sdf(self.unit_sphere, (0, 0, 0)), -0.5)

    def test_union_is_minimum(self):
        scene = Scene([Sphere((0, 0, 0), 0.5), Sphere((2, 0, 0), 0.25)])
        point = (1.5, 0, 0)
        expected = min(1.5 - 0.5, 0.5 - 0.25)
        self.assertAlmostEqual(scene_sdf(scene, point), expected)

    def test_box_distances(self):
        scene = Scene([Box(center=(0, 0, 0), half_extents=(1, 1, 1))])
        self.assertAlmostEqual(scene_sdf(scene, (2, 0, 0)), 1.0)
        self.assertAlmostEqual(scene_sdf(scene, (0, 0, 0)), -1.0)
        self.assertAlmostEqual(scene_sdf(scene, (2, 2, 1)), np.sqrt(2.0))

    def test_plane_half_space(self):
        scene = Scene([Plane(normal=(0, 0, 2), offset=0.5)])
        self.assertAlmostEqual(scene_sdf(scene, (3, -1, 1.0)), 0.5)
        self.assertAlmostEqual(scene_sdf(scene, (0, 0, 0.0)), -0.5)

    def test_vectorized_sdf(self):
        points = np.array([[[1, 0, 0], [0, 0, 0]], [[0, 2, 0], [0, 0, 0.5]]], dtype=float)
        distances = self.unit_sphere.sdf(points)
        self.assertEqual(distances.shape, (2, 2))
        np.testing.assert_allclose(distances, [[0.5, -0.5], [1.5, 0.0]])

    def test_empty_scene_is_infinitely_far(self):
        self.assertEqual(scene_sdf(Scene([]), (0, 0, 0)), np.inf)


class TestSceneFiles(unittest.TestCase):
    """Test scene JSON parsing and validation."""

    def test_round_trip(self):
        scene = Scene([Sphere((0, 0, 1), 0.3), Box((1, 1, 0), (0.2, 0.3, 0.4)),
                       Plane((0, 0, 1), 0.0)])
        loaded = Scene.from_json(scene.to_json())
        points = np.random.default_rng(0).uniform(-2, 2, size=(50, 3))
        np.testing.assert_array_equal(loaded.sdf(points), scene.sdf(points))

    def test_syntax_error_reports_line(self):
        text = '{\n  "primitives": [\n    oops\n  ]\n}'
        with self.assertRaises(SceneFormatError) as context:
            Scene.from_json(text)
        self.assertEqual(context.exception.line, 3)
        self.assertIn("line 3", str(context.exception))

    def test_empty_scene_rejected(self):
        with self.assertRaises(SceneFormatError):
            Scene.from_json('{"primitives": []}')

    def test_unknown_primitive_rejected(self):
        with self.assertRaises(SceneFormatError):
            Scene.from_json('{"primitives": [{"type": "torus", "center": [0, 0, 0]}]}')

    def test_missing_field_rejected(self):
        with self.assertRaises(SceneFormatError):
            Scene.from_json('{"primitives": [{"type": "sphere", "center": [0, 0, 0]}]}')

    def test_invalid_values_rejected(self):
        with self.assertRaises(SceneFormatError):
            Scene.from_json('{"primitives": [{"type": "sphere", "center": [0, 0], "radius": 1}]}')
        with self.assertRaises(SceneFormatError):
            Scene.from_json('{"primitives": [{"type": "box", "center": [0, 0, 0], '
                            '"half_extents": [1, 0, 1]}]}')


if __name__ == '__main__':
    unittest.main()
