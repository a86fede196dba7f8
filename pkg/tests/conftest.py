import pytest

from packlife.ageing import line_from_draw, rho_to_line
from packlife.electrics import CellElectricalParams, OcvCurve
from packlife.fpu import CyclingProtocol


@pytest.fixture
def params():
    return CellElectricalParams()


@pytest.fixture
def curve():
    return OcvCurve.default()


@pytest.fixture
def proto():
    return CyclingProtocol()


@pytest.fixture
def rcl():
    return rho_to_line(124.5)


@pytest.fixture
def short_life_lines(params, rcl):
    """Four distinct cells that reach end of life in a few dozen cycles.

    Keeps full-lifetime simulations cheap for unit tests; the dynamics per
    cycle are identical to long-lived configurations.
    """
    draws = [(0.9939, 40.0), (0.991, 34.0), (0.997, 45.0), (0.992, 38.5)]
    return tuple(
        line_from_draw(qs, ee, rcl, params.q_nom, params.r_nom) for qs, ee in draws
    )
