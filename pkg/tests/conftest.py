from __future__ import annotations

import numpy as np
import pytest

from sparsebreaks.panel import RegressionPanel


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance measurements")


def random_panel(
    rng: np.random.Generator,
    T: int,
    m: int,
    n: int,
    jump_prob: float = 0.15,
    noise: float = 0.5,
) -> RegressionPanel:
    """Gaussian design with a sparse random-jump coefficient path."""
    X = rng.standard_normal((T, m, n))
    jumps = rng.standard_normal((T, n)) * 3.0 * (rng.random((T, 1)) < jump_prob)
    betas = rng.standard_normal(n) + np.cumsum(jumps, axis=0)
    y = np.einsum("tmn,tn->tm", X, betas) + noise * rng.standard_normal((T, m))
    return RegressionPanel(X, y)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Append one summary line per acceptance criterion, shown after the run."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
