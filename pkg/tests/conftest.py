import numpy as np
import pytest

from roadformation.dynamics import BoundSet
from roadformation.formation import FormationSpec
from roadformation.partition import PartitionGeometry
from roadformation.road import RoadModel

from helpers import four_vehicle_shapes


@pytest.fixture(scope="session")
def straight_road() -> RoadModel:
    return RoadModel.straight(500.0)


@pytest.fixture(scope="session")
def arc_road() -> RoadModel:
    # under a full turn, so nearest-point projection stays unambiguous
    return RoadModel.constant_arc(450.0, 0.01, half_width=5.0)


@pytest.fixture(scope="session")
def curvy_road() -> RoadModel:
    return RoadModel.from_knots(
        curvature=[(0, 0.0), (60, 0.0), (90, 0.02), (150, 0.02), (180, -0.01), (260, -0.01), (300, 0.0), (400, 0.0)],
        left_bound=[(0.0, 6.0)],
        right_bound=[(0.0, -6.0)],
        s_max=400.0,
    )


@pytest.fixture(scope="session")
def geom() -> PartitionGeometry:
    return PartitionGeometry(delta_s=10.0, delta_r=3.0)


@pytest.fixture(scope="session")
def triangle_spec() -> FormationSpec:
    """Three-vehicle triangle: followers ten metres back, three to each side."""
    return FormationSpec(
        shape=((0.0, 0.0), (-10.0, 3.0), (-10.0, -3.0)),
        parents=(None, 0, 1),
        priority=(0, 1, 2),
        name="triangle",
    )


@pytest.fixture(scope="session")
def reconfig_shapes() -> dict[str, FormationSpec]:
    return four_vehicle_shapes()


@pytest.fixture(scope="session")
def spec_bounds() -> BoundSet:
    return BoundSet(v_min=0.0, v_max=10.0, a_max=2.5, k_max=0.2, kappa_max=0.1, a_lat_max=2.5)


@pytest.fixture(autouse=True)
def _seed_numpy():
    np.random.seed(0)
