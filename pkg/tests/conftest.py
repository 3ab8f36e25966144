"""Pytest configuration and shared fixtures for all tests."""

import pytest
import sys
import tempfile
import shutil
from pathlib import Path

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from noncollide.coefficients import (
    BetaWishart,
    DysonCepa,
    Jacobi,
    NearestNeighbor,
    build_preset,
)
from noncollide.integrate import StepControl


# ==================== Configuration ====================

def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "benchmark: full-scale acceptance run (run with --benchmark)"
    )
    config.addinivalue_line(
        "markers", "integration: mark test as integration test"
    )
    config.addinivalue_line(
        "markers", "unit: mark test as unit test"
    )


def pytest_addoption(parser):
    """Add custom command line options."""
    parser.addoption(
        "--benchmark",
        action="store_true",
        default=False,
        help="run full-scale acceptance criteria (slow)"
    )


def pytest_collection_modifyitems(config, items):
    """Skip benchmark tests unless explicitly requested."""
    if not config.getoption("--benchmark"):
        skip_benchmark = pytest.mark.skip(reason="need --benchmark option to run")
        for item in items:
            if "benchmark" in item.keywords:
                item.add_marker(skip_benchmark)


# ==================== Session-Scoped Fixtures ====================

@pytest.fixture(scope="session")
def test_output_dir():
    """Create a shared output directory for the entire test session."""
    output_dir = Path(tempfile.mkdtemp(prefix="noncollide_test_output_"))
    yield output_dir
    # Clean up after all tests
    shutil.rmtree(output_dir, ignore_errors=True)


# ==================== Coefficient Set Fixtures ====================

@pytest.fixture(scope="session")
def dyson3():
    """Dyson system with gamma = 1, p = 3."""
    return build_preset(DysonCepa(gamma=1.0), 3)


@pytest.fixture(scope="session")
def dyson2():
    """Dyson system with gamma = 1, p = 2."""
    return build_preset(DysonCepa(gamma=1.0), 2)


@pytest.fixture(scope="session")
def wishart3():
    """Beta-Wishart with alpha = 3, beta = 1, p = 3."""
    return build_preset(BetaWishart(alpha=3.0, beta=1.0), 3)


@pytest.fixture(scope="session")
def jacobi3():
    """Jacobi with q = r = 3, beta = 1, p = 3."""
    return build_preset(Jacobi(q=3.0, r=3.0, beta=1.0), 3)


@pytest.fixture(scope="session")
def nearest3():
    """Nearest-neighbour repulsion at the p = 3 threshold."""
    return build_preset(NearestNeighbor(gamma=0.75), 3)


@pytest.fixture
def small_step():
    """Step control used by the quick simulation tests."""
    return StepControl(dt_base=1e-3, sample_every=10)


# ==================== Test Data Fixtures ====================

@pytest.fixture(scope="session")
def chamber_points():
    """Strictly ordered points of several sizes."""
    return {
        2: np.array([-0.5, 0.75]),
        3: np.array([-1.0, 0.25, 1.5]),
        4: np.array([-1.2, -0.3, 0.4, 2.0]),
        5: np.array([-2.0, -0.9, 0.1, 0.8, 1.7]),
    }


@pytest.fixture
def dyson_yaml():
    """Minimal valid Dyson run config."""
    return (
        "system: dyson\n"
        "gamma: 1.0\n"
        "p: 3\n"
        "x0: zero\n"
        "T: 0.05\n"
        "dt: 1.0e-3\n"
        "n_paths: 20\n"
        "sample_every: 10\n"
        "seed: 11\n"
    )


@pytest.fixture
def write_config(tmp_path):
    """Write YAML text to a config file and return its path."""
    def _write(text, name="config.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


# ==================== Helper Functions ====================

@pytest.fixture
def assert_ordered():
    """Helper to assert every row of a state array is ascending."""
    def _assert(states):
        states = np.atleast_2d(states)
        assert np.all(np.diff(states, axis=-1) >= 0), "States must be sorted ascending"
    return _assert


@pytest.fixture
def assert_valid_json():
    """Helper to assert valid JSON structure."""
    def _assert(data, required_fields):
        assert isinstance(data, dict), "Document should be a dictionary"
        for field in required_fields:
            assert field in data, f"Missing required field: {field}"
    return _assert
