"""
Performance and desk-scale acceptance tests.

These run the default 320x240 simulation and are marked slow; select them
with `pytest -m slow`.
"""

import time

import numpy as np
import pytest

from config import settings
from models.experiment_config import CameraConfig, ExperimentConfig
from models.geometry import look_at
from processors.tsdf_volume import TsdfVolume
from services.experiment_runner import (
    COMPARED_STRATEGIES, Representation, Strategy, compare_strategies,
)
from services.simulator import (
    default_room_scene, default_simulation_config, render_depth, run_simulation,
)

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def default_run():
    return run_simulation(default_room_scene(), default_simulation_config(seed=0))


class TestIntegrationSpeed:
    """Test single-frame integration cost"""

    def test_frame_into_150_cubed_volume(self):
        k = CameraConfig().to_intrinsics()
        pose = look_at((2.0, 0.0, 1.5), (0.0, 0.0, 0.5))
        depth = render_depth(default_room_scene(), pose, k)
        volume = TsdfVolume(origin=(-3.0, -3.0, 0.0), voxel_size=settings.VOXEL_SIZE,
                            dims=(150, 150, 150), truncation=settings.VOXEL_SIZE * 3)
        volume.integrate_depth(depth, pose, k)

        timings = []
        for _ in range(3):
            started = time.perf_counter()
            volume.integrate_depth(depth, pose, k)
            timings.append(time.perf_counter() - started)
        assert min(timings) <= 0.1


class TestStrategyOrdering:
    """Final-checkpoint F-score ordering on the default drifting scene"""

    @pytest.mark.parametrize('representation', [Representation.TSDF, Representation.FEATVOL])
    def test_deintegration_wins(self, default_run, representation):
        started = time.perf_counter()
        results = compare_strategies(default_run.stream, default_run.depths,
                                     default_run.intrinsics, representation,
                                     ExperimentConfig(threads=1))
        elapsed = time.perf_counter() - started
        final = {strategy: results[strategy].final_report().fscore
                 for strategy in COMPARED_STRATEGIES}
        assert final[Strategy.DEINTEGRATE] - final[Strategy.REINTEGRATE_ONLY] >= 0.02
        assert final[Strategy.REINTEGRATE_ONLY] - final[Strategy.NO_UPDATES] >= 0.02
        assert elapsed < 300

    def test_stale_surfaces_hurt_accuracy(self, default_run):
        results = compare_strategies(default_run.stream, default_run.depths,
                                     default_run.intrinsics,
                                     strategies=(Strategy.REINTEGRATE_ONLY,
                                                 Strategy.DEINTEGRATE))
        stale = results[Strategy.REINTEGRATE_ONLY].final_report()
        clean = results[Strategy.DEINTEGRATE].final_report()
        assert stale.accuracy > clean.accuracy
        assert np.isclose(stale.completeness, clean.completeness, atol=0.01)
