import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure the modules import when the repository root is not on the path
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from graphs import built_in
from spectral import eigenpairs, interval

PRESET_GRAPHS = {
    "identity": {},
    "heaviside": {},
    "stefan": {},
    "power": {"p": 1.5},
    "arctan": {},
}


@pytest.fixture(params=sorted(PRESET_GRAPHS))
def preset_graph(request):
    return built_in(request.param, **PRESET_GRAPHS[request.param])


@pytest.fixture
def unit_basis():
    return eigenpairs(interval(1.0), 8)


@pytest.fixture
def r_grid():
    return np.linspace(-3.0, 3.0, 1000)
