from pathlib import Path

import pytest

from tclgrid.grid_model import default_grid, one_norm
from tclgrid.scenario import load_scenario_file

REPO_ROOT = Path(__file__).resolve().parent.parent
SHIPPED_SCENARIO = REPO_ROOT / "scenarios" / "paper-vi-desk.yaml"


@pytest.fixture(scope="session")
def shipped_file():
    return load_scenario_file(SHIPPED_SCENARIO)


@pytest.fixture(scope="session")
def default_l_hat():
    return one_norm(default_grid()).value
