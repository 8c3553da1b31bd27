import itertools

import pytest
from hypothesis import HealthCheck, settings

from madm.model import ModelParams

settings.register_profile("madm", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("madm")

GAMMAS = (0.3, 0.6, 0.9)
BETAS = ((0.2, 0.4), (0.5, 0.5), (0.7, 0.3))
CELLS = tuple(itertools.product(GAMMAS, BETAS))


def cell_id(cell):
    g, (bl, br) = cell
    return f"g{g}-bl{bl}-br{br}"


@pytest.fixture
def defaults():
    return ModelParams(0.5, 0.2, 0.4, 2)
