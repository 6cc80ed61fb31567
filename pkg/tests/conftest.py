import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dsomarket.builtin import MODES, builtin_case  # noqa: E402
from dsomarket.pricing import run_case  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def solved():
    """Builtin cases solved once per session: mode -> (inst, scen, CaseResult)."""
    cache = {}

    def get(mode):
        if mode not in cache:
            inst, scen = builtin_case(mode)
            cache[mode] = (inst, scen, run_case(inst, scen))
        return cache[mode]
    return get


@pytest.fixture(params=MODES)
def mode(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
