import math

import pytest

from robinspec import sectors


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical checks (minutes)")


@pytest.fixture(scope="session")
def nonres_pi4():
    """Non-resonance run at theta = pi/4 on the radii used by the acceptance check."""
    return sectors.nonresonance(math.pi / 4, [10.0, 15.0, 20.0, 30.0])


@pytest.fixture(scope="session")
def square_table():
    """Square, thm1, two side levels over alpha = 10, 20, 40, 80."""
    from robinspec.harness import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(polygon="square(1)", alphas=(10.0, 20.0, 40.0, 80.0), n_max=2, name="square")
    return run_experiment(cfg, write=False)


@pytest.fixture(scope="session")
def triangle_table():
    """Equilateral triangle against the (wrong) straight-side prediction."""
    from robinspec.harness import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(polygon="equilateral(1)", alphas=(10.0, 20.0, 40.0), n_max=1, name="triangle")
    return run_experiment(cfg, write=False)


@pytest.fixture(scope="session")
def half_disk_table():
    from robinspec.harness import ExperimentConfig, run_experiment

    cfg = ExperimentConfig(polygon="half-disk(1)", alphas=(10.0, 20.0), n_max=1, formula="thm3", name="half_disk")
    return run_experiment(cfg, write=False)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
