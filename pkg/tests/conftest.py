import os

import numpy as np
import pytest

from projnav import fem, mesh as meshmod


def _seed():
    return int(os.environ.get("PROJNAV_SEED", "42"))


@pytest.fixture
def rng():
    return np.random.default_rng(_seed())


@pytest.fixture(scope="session")
def seed():
    return _seed()


@pytest.fixture(scope="session")
def structured_meshes():
    return {n: meshmod.build_structured_unit_square(n) for n in (1, 2, 4, 8)}


@pytest.fixture(scope="session")
def spaces4(structured_meshes):
    mesh = structured_meshes[4]
    return fem.SpaceP2Vector(mesh), fem.SpaceP1(mesh, zero_mean=True)
