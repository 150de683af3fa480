import numpy as np
import pytest

from jcas.channel import (
    Geometry,
    OreGrid,
    calibrate_links,
    los_links,
    random_binary_pattern,
)
from jcas.gamp import PriorParams
from jcas.scene import RoomSpec, random_scene
from jcas.scma import default_codebook


@pytest.fixture(scope="session")
def room():
    return RoomSpec((4.0, 4.0, 4.0), (0.5, 0.5, 0.5))


@pytest.fixture(scope="session")
def truth(room):
    return random_scene(room, 0.015, seed=1)


@pytest.fixture(scope="session")
def geometry():
    rng = np.random.default_rng(0)
    n_u, n_r = 6, 8
    users = np.column_stack(
        [
            rng.uniform(0.5, 2.8, n_u),
            rng.uniform(0.5, 3.4, n_u),
            np.full(n_u, 1.0),
        ]
    )
    ap = np.column_stack(
        [np.full(n_r, 0.05), np.linspace(0.8, 3.2, n_r), np.full(n_r, 3.0)]
    )
    ii, jj = np.meshgrid(np.arange(20), np.arange(20), indexing="ij")
    irs = np.column_stack(
        [
            np.full(400, 3.95),
            0.9 + ii.ravel() * 0.1,
            0.9 + jj.ravel() * 0.1,
        ]
    )
    return Geometry(users, ap, irs)


@pytest.fixture(scope="session")
def links(geometry, room):
    raw = los_links(geometry, room, OreGrid.uniform_band(4))
    return calibrate_links(raw, random_binary_pattern(400, 0, 7))


@pytest.fixture(scope="session")
def codebook():
    return default_codebook()


@pytest.fixture(scope="session")
def prior(room):
    return PriorParams(lam=8 / room.n_voxels, theta=0.5, sigma_x=0.1)
