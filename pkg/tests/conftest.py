import numpy as np
import pytest

from mapverify.mapmodel import BuildingOutline, Lane, MapData
from mapverify.scenario import ScenarioSpec, generate
from mapverify.state import EgoState, GlobalTrack, TrackState


def unit_square(id="sq", x=0.0, y=0.0, size=1.0):
    return BuildingOutline(id, [[x, y], [x + size, y], [x + size, y + size], [x, y + size]])


def make_global(x, y, phi=0.0, sigma=((0.01, 0.0), (0.0, 0.01)), phi_var=0.0, **kw):
    return GlobalTrack(label=kw.pop("label", 1), x=x, y=y, phi=phi, sigma=np.array(sigma, dtype=float), phi_var=phi_var, **kw)


def make_track(label=1, x=0.0, y=0.0, phi=0.0, pos_var=0.01, phi_var=0.01, existence=0.9, class_probs=None):
    cov = np.diag([pos_var, pos_var, 0.25, 0.25, phi_var, 0.01])
    return TrackState(label, x, y, 1.0, 0.0, phi, 0.0, cov, existence, class_probs or {})


def make_ego(x=0.0, y=0.0, phi=0.0, pos_var=0.0, timestamp=0.0):
    return EgoState(x, y, 5.0, 0.0, phi, 0.0, np.diag([pos_var, pos_var, 0.01, 0.01, 1e-4, 1e-4]), timestamp)


@pytest.fixture
def street_map():
    """Two-lane eastbound road along y in [-7, 0] with a block north of it."""
    lanes = [
        Lane("a", [[-100.0, -1.75], [100.0, -1.75]], 3.5, "main"),
        Lane("b", [[-100.0, -5.25], [100.0, -5.25]], 3.5, "main"),
    ]
    building = BuildingOutline("house", [[-20.0, 4.0], [20.0, 4.0], [20.0, 24.0], [-20.0, 24.0]])
    return MapData.build([building], lanes)


@pytest.fixture(scope="session")
def city_scenario():
    return generate(ScenarioSpec.defaults("city", 42))


@pytest.fixture(scope="session")
def rural_scenario():
    return generate(ScenarioSpec.defaults("rural", 42))
