import os
import sys
import warnings

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from cellgeom.analytics import NetworkConfig, mean_spectral_efficiency, outage_probability  # noqa: E402
from cellgeom.propagation import QuadExp  # noqa: E402

L_VALUES = (0.040, 0.0825, 0.120)
LAMBDA_GRID = np.logspace(0.0, 4.0, 17)


@pytest.fixture(scope="session")
def se_grid():
    """Mean SE on the default density grid for each L, ``{L: array}``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return {
            L: np.array([mean_spectral_efficiency(NetworkConfig(lam=lam, los=QuadExp(L))) for lam in LAMBDA_GRID])
            for L in L_VALUES
        }


@pytest.fixture(scope="session")
def outage_grid():
    """Outage at -10 and -5 dB on the default density grid, ``{L: array (2, n)}``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return {
            L: np.array([outage_probability(NetworkConfig(lam=lam, los=QuadExp(L)), [-10.0, -5.0])
                         for lam in LAMBDA_GRID]).T
            for L in L_VALUES
        }


@pytest.fixture
def acceptance_log(request):
    """Append-only list of result lines shown in the terminal summary."""
    config = request.config
    if not hasattr(config, "acceptance_lines"):
        config.acceptance_lines = []
    return config.acceptance_lines


def pytest_terminal_summary(terminalreporter):
    lines = getattr(terminalreporter.config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
