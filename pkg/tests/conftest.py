from fractions import Fraction

import pytest

from esnash import SeekerParams, SimConfig, builtin_example, simulate

PAPER_GAINS = (
    dict(k=1.273, b=0.7, omega_l=0.9, omega_h=0.12, omega=Fraction(2), phi=0.0, u_hat0=0.25),
    dict(k=0.9046, b=0.5, omega_l=1.5, omega_h=0.2, omega=Fraction(3), phi=0.0, u_hat0=0.9),
)
NASH = (25 / 64, 5 / 8)
NASH_PAYOFF = ((25 / 64) ** 2, 2 * (5 / 8) ** 3)


def paper_params(a0=0.2, **overrides):
    return [SeekerParams(a0=a0, **{**g, **overrides}) for g in PAPER_GAINS]


@pytest.fixture(scope="session")
def game():
    return builtin_example()


@pytest.fixture(scope="session")
def paper_wsso(game):
    return simulate(game, paper_params(), SimConfig(horizon=100.0, step=1e-3, sample_stride=10))


@pytest.fixture(scope="session")
def paper_classical(game):
    cfg = SimConfig(horizon=100.0, step=1e-3, sample_stride=10, mode="classical", enforce_action_bounds=False)
    return simulate(game, paper_params(), cfg)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
