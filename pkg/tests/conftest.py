import numpy as np
import pytest

from eeaval.data import GeneratorConfig, generate_synthetic, plan_temporal_folds


@pytest.fixture(scope="session")
def small_world():
    """4,000 paired synthetic days, 2 degrees cooler counterfactual."""
    return generate_synthetic(GeneratorConfig(n_days=4000, temperature_shift=-2.0), 3)


@pytest.fixture(scope="session")
def small_folds(small_world):
    return plan_temporal_folds(small_world[0], 6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)
