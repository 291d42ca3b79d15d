import numpy as np
import pytest

from ofdma_rrm.config import parse_config, with_overrides


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_config():
    return parse_config()


def small_config(**overrides):
    """A short, cheap run: few TTIs and UEs, defaults otherwise."""
    base = {"run.n_ttis": 60, "run.warmup_ttis": 20, "layout.ues_per_cell": 3}
    base.update(overrides)
    return with_overrides(parse_config(), base)


# acceptance lines collected by tests/test_acceptance.py, printed after the run
ACCEPTANCE = []


def acceptance(number: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
