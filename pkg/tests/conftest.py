import numpy as np
import pytest

from scengen.data import FactorLayout
from scengen.oracle import SyntheticSpec, generate_synthetic_panel


def two_currency_layout():
    return FactorLayout(("EUR", "USD"), (0.0, 0.5, 1.0, 2.0, 5.0))


def hjm_directions(layout, scale=1.0):
    """Three constant directions spanning level, slope and FX moves."""
    x = layout.tenors
    n = layout.n
    lam = np.zeros((3, layout.J))
    lam[0, :n] = 0.05
    lam[0, n : 2 * n] = 0.03
    lam[0, -1] = 0.05
    lam[1, :n] = 0.03 * np.exp(-x / 2)
    lam[1, n : 2 * n] = 0.04 * np.exp(-x / 3)
    lam[1, -1] = -0.04
    lam[2, n : 2 * n] = 0.01
    lam[2, -1] = 0.08
    return scale * lam


def hjm_initial(layout):
    x = layout.tenors
    return np.concatenate([0.02 + 0.001 * x, 0.03 + 0.002 * x, [0.1]])


@pytest.fixture(scope="session")
def layout2():
    return two_currency_layout()


@pytest.fixture(scope="session")
def hjm_panel(layout2):
    spec = SyntheticSpec(
        "hjm", layout2, 600, seed=3, initial=hjm_initial(layout2), directions=hjm_directions(layout2)
    )
    return generate_synthetic_panel(spec)


# -- acceptance reporting ---------------------------------------------------

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion and return the verdict."""

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} -- {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
