import pathlib

import pytest

FIXTURES = pathlib.Path(__file__).parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def calibrated_tau() -> float:
    from heraldsim.experiments import calibrate_tau

    return calibrate_tau()["tau"]
