import math

import pytest

from pronksim.params import ApexState, PlantParams

# Nominal physical parameters and gait target (SI).
Z_STAR_SI = 0.195
YDOT_STAR_SI = 1.6


@pytest.fixture(scope="session")
def plant_params():
    return PlantParams()


@pytest.fixture(scope="session")
def template(plant_params):
    return plant_params.template()


@pytest.fixture(scope="session")
def scale(plant_params):
    return plant_params.scale


@pytest.fixture(scope="session")
def target(scale):
    return ApexState(scale.length_nd(Z_STAR_SI), scale.velocity_nd(YDOT_STAR_SI))
