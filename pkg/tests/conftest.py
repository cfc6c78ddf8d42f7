from __future__ import annotations

import pytest

from aloha_packetization.model import NetworkParams

# operating point used for the packet-size sensitivity and threshold studies
OPT_BASE = NetworkParams(n=50, lambda_b=100.0, R=1e7, q=0.01,
                         delta_cf=0.005, delta_cb_f=0.003, delta_cb_s=0.008)
# delay-versus-L operating point; q varies per curve
SIM_BASE = NetworkParams(n=100, lambda_b=1e3, R=1e6, q=0.02,
                         delta_cf=0.005, delta_cb_f=0.004, delta_cb_s=0.009)


@pytest.fixture(scope="session")
def opt_base():
    return OPT_BASE


@pytest.fixture(scope="session")
def sim_base():
    return SIM_BASE


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
