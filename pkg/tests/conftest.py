import numpy as np
import pytest

from blowuplab.grids import CylGrid, RadialGrid
from blowuplab.profiles import ProfileParams, find_profiles, kappa_profile


@pytest.fixture(scope="session")
def radial_grid():
    return RadialGrid.uniform(15.0, 0.02)


@pytest.fixture(scope="session")
def cyl_grid_small():
    return CylGrid.uniform(r_max=12.0, h_r=0.05, z_max=12.0, h_z=0.05)


@pytest.fixture(scope="session")
def kappa7():
    return kappa_profile(7.0)


@pytest.fixture(scope="session")
def shooting7():
    """The first nontrivial p = 7 profile (session-cached; ~seconds)."""
    params = ProfileParams(p=7.0)
    profiles = find_profiles(params, 0.8, 3.0, scan_points=24)
    assert profiles, "no p=7 profile found in the scan window"
    return profiles[0]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
