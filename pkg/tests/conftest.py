"""
Shared fixtures for the Bipolar CPWM tests.
"""

import sys
from pathlib import Path

import pytest

# Add project root to path for imports
project_root = Path(__file__).resolve().parent.parent
sys.path.append(str(project_root))

from cpwm_solver.components.core import wavenumber_to_hartree
from cpwm_solver.components.potential_models import (
    ECKART_A_HEIGHT,
    ZERO,
    DiabaticModel,
    ScatteringProblem,
    make_benchmark,
)

RESOURCES_DIR = project_root / "resources"


@pytest.fixture
def anyio_backend():
    return "asyncio"


@pytest.fixture
def resources_dir() -> Path:
    return RESOURCES_DIR


@pytest.fixture
def free_problem() -> ScatteringProblem:
    """One flat surface; every component stays a plane wave."""
    model = DiabaticModel.build("free", {(0, 0): ZERO}, 1, effective="zero")
    return ScatteringProblem(model, ECKART_A_HEIGHT, -2.0, 2.0)


@pytest.fixture
def eckart_problem() -> ScatteringProblem:
    return ScatteringProblem(make_benchmark("eckart_a"), ECKART_A_HEIGHT, -2.0, 2.0)


@pytest.fixture
def ramp_problem() -> ScatteringProblem:
    return ScatteringProblem(make_benchmark("uphill_ramp"), 0.0023, -1.5, 2.2)


@pytest.fixture
def pure_coupling_problem() -> ScatteringProblem:
    return ScatteringProblem(make_benchmark("pure_coupling"), wavenumber_to_hartree(100.0), -3.0, 3.0)


@pytest.fixture
def tully2_problem() -> ScatteringProblem:
    return ScatteringProblem(make_benchmark("tully2"), 0.1353352832366127, -8.0, 8.0)
