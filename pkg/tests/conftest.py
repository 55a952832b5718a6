import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from curvenet.cloud import save_ply
from curvenet.synthetic import SyntheticSpec, generate_synthetic

DIAG = 3 ** 0.5
CUBE_HOLES = [((0.5, 0, 0), 0.08 * DIAG), ((1, 0.5, 0), 0.08 * DIAG),
              ((0.5, 1, 1), 0.08 * DIAG), ((0, 0.5, 1), 0.08 * DIAG),
              ((0, 0, 0.5), 0.08 * DIAG), ((1, 1, 0.5), 0.08 * DIAG)]

CUBE_PIPELINE_PARAMS = {
    "k": 32, "sigma_t": 0.04, "regularity_tol": 0.08,
    "growth": {"s_max": 8.0, "min_points": 5, "corner_ratio": 0.6},
    "completion_radius": 0.15 * DIAG, "alignment_radius": 0.08,
    "weights": "scan", "lambda_merge": 0.9,
}


@pytest.fixture(scope="session")
def holey_cube():
    """20k-sample noisy cube with six spherical holes centered on edges."""
    spec = SyntheticSpec(shape="cube", density=20000 / 6, noise=0.003,
                         holes=CUBE_HOLES, seed=0)
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def holey_cube_ply(holey_cube, tmp_path_factory):
    cloud, _ = holey_cube
    path = tmp_path_factory.mktemp("data") / "cube.ply"
    save_ply(path, cloud)
    return path


@pytest.fixture(scope="session")
def cylinder_cloud():
    spec = SyntheticSpec(shape="cylinder", density=15000 / (6 * np.pi),
                         noise=0.003, seed=1)
    return generate_synthetic(spec)
