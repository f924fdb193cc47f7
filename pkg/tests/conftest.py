import pytest

from polarcp.evaluation import train_heads
from polarcp.synthdata import GeneratorConfig, generate


@pytest.fixture(scope="session")
def pool():
    """Evaluation pool: 500 calibration + 2000 test samples per shuffle."""
    return generate(GeneratorConfig(n=2500, seed=7))


@pytest.fixture(scope="session")
def train_data():
    return generate(GeneratorConfig(n=1000, seed=8))


@pytest.fixture(scope="session")
def heads_by_alpha(train_data):
    return train_heads(train_data, (0.3, 0.4))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
