import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, settings

from mlayout import dsl
from mlayout.table import InstanceTable

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

COIN = 'layout "coin" { capability p ~ uniform(0,1) observe y ~ bernoulli(p) }'


@pytest.fixture(scope="session")
def aaio():
    return dsl.load_layout("aaio")


@pytest.fixture(scope="session")
def op():
    return dsl.load_layout("op")


@pytest.fixture(scope="session")
def coin():
    return dsl.parse(COIN)


def coin_table(successes: int, failures: int) -> InstanceTable:
    y = np.r_[np.ones(successes), np.zeros(failures)].astype(int)
    return InstanceTable(pd.DataFrame(index=range(len(y))), outcomes=y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    """Log one acceptance line; printed again in the terminal summary."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


def note(text: str) -> None:
    """Informational line for the acceptance summary (no verdict)."""
    ACCEPTANCE.append(f"info        : {text}")
    print(text)
