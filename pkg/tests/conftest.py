import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def direct_pcaf(x, y, l, p, n_f):
    """Triple-loop oracle: sum_n conj(x[n]) y[(n+l) mod N] exp(-2j*pi*(n+1)*p/N_f)."""
    n_len = len(x)
    acc = 0j
    for n in range(n_len):
        acc += np.conj(x[n]) * y[(n + l) % n_len] * np.exp(-2j * np.pi * (n + 1) * p / n_f)
    return acc


def direct_energy(x, y, p_max, n_f):
    n_len = len(x)
    return sum(
        abs(direct_pcaf(x, y, l, p, n_f)) ** 2
        for l in range(-(n_len - 1), n_len)
        for p in range(-p_max, p_max + 1)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
