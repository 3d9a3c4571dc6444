import numpy as np
import pytest

from proprio.kinematics import LegGeometry, default_legs


@pytest.fixture(scope="session")
def legs():
    # explicit geometry: tests must not depend on library defaults
    return default_legs(abd=0.062, l1=0.209, l2=0.195, hip_x=0.19, hip_y=0.049)


@pytest.fixture(scope="session")
def one_leg():
    return LegGeometry(0.07, 0.21, 0.19, np.array([0.18, -0.05, 0.0]), -1)


def random_reachable_angles(rng, n=1):
    """Joint angles inside the knee-backward, foot-below-hip branch."""
    out = np.empty((n, 3))
    count = 0
    while count < n:
        a = np.array(
            [rng.uniform(-0.9, 0.9), rng.uniform(-1.2, 1.2), rng.uniform(0.1, 2.8)]
        )
        # planar foot must hang below the hip for the IK branch
        l1, l2 = 0.21, 0.19
        iz = -l1 - l2 * np.cos(a[2])
        ix = -l2 * np.sin(a[2])
        z = -np.sin(a[1]) * ix + np.cos(a[1]) * iz
        if z < -0.02:
            out[count] = a
            count += 1
    return out if n > 1 else out[0]
