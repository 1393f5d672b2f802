import pytest

from esspec import background, modes


@pytest.fixture(scope="session")
def iso():
    return background.build_background(5.0 / 3.0, 0.0)


@pytest.fixture(scope="session")
def baro():
    return background.build_background(5.0 / 3.0, 0.1)


@pytest.fixture(scope="session")
def convective():
    # negative entropy gradient: the mirror star with N^2 < 0
    return background.build_background(5.0 / 3.0, -0.1)


@pytest.fixture(scope="session")
def iso_op(iso):
    return modes.assemble_radial(iso, 2, 400)


@pytest.fixture(scope="session")
def iso_table(iso_op):
    return modes.solve_modes(iso_op)


@pytest.fixture(scope="session")
def baro_op(baro):
    return modes.assemble_radial(baro, 2, 400)


@pytest.fixture(scope="session")
def baro_table(baro_op):
    return modes.solve_modes(baro_op)
