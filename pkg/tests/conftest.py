import pytest

from racetrack_rf.geometry import DEFAULT_GEOMETRY, RegisterFileGeometry, validate_geometry


@pytest.fixture
def geom():
    return DEFAULT_GEOMETRY


@pytest.fixture
def small_geom():
    # 4 tracks of 16 positions holding 8 registers of 8 bits
    return validate_geometry(RegisterFileGeometry(4, 16, 2, 8, 8))
