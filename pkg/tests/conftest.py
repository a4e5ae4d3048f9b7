import pytest

from rtfalsify import ParameterizedInput, SignalShape, load_bundled_table


@pytest.fixture(scope="session")
def sc_table():
    return load_bundled_table("sc")


@pytest.fixture(scope="session")
def omm_tables():
    return {name: load_bundled_table(f"omm-rt{name}") for name in (0, 1, 2)}


@pytest.fixture()
def omm_pi():
    return ParameterizedInput(
        shapes=(
            SignalShape("u1", -100.0, 100.0),
            SignalShape("u2", -100.0, 100.0),
        ),
        horizon=10.0,
        dt=0.5,
    )
