import numpy as np
import pytest

from cqedspec import CavityParams, CollectiveCoupling, Grid, SystemConfig, build_from_splittings


def theory_config(g=4.3, delta_c=0.0, kappa=2.0, dp=(-30.0, 15.0), points=4501):
    ladder = build_from_splittings(5.0, 10.0)
    return SystemConfig(
        ladder,
        CollectiveCoupling.uniform(g, 3),
        CavityParams(kappa, delta_c),
        Grid(dp[0], dp[1], points),
    )


@pytest.fixture
def fig2a():
    return theory_config()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
