import numpy as np
import pytest

from plateflow.channel_model import make_config

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)


def random_config(rng, n_max=6, gap=(0.5, 10.0), flow=(-1.0, 1.0), zero_flow=False):
    n = int(rng.integers(1, n_max + 1))
    flows = np.zeros(n + 1) if zero_flow else rng.uniform(*flow, n + 1)
    return make_config(rng.uniform(*gap, n + 1), flows)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
