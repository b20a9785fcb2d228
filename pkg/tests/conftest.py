import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uniqlab.grid import CoefficientSpec, DomainSpec, Problem  # noqa: E402
from uniqlab.report import certify  # noqa: E402
from uniqlab.scenarios import scenario_config  # noqa: E402


def make_problem(dim, lower, upper, coeffs, origin=None, shape="box", truncated=(), name="test", **params):
    spec = DomainSpec(dim, lower, upper, shape, params, frozenset(truncated), origin)
    return Problem(spec, CoefficientSpec(dim, coeffs, name), name)


@functools.lru_cache(maxsize=None)
def scenario_report(name):
    return certify(scenario_config(name))


@pytest.fixture
def unit_interval():
    return lambda c11="1", **kw: make_problem(1, (0,), (1,), {"c11": c11, **kw}, origin=(0.5,))


@pytest.fixture
def unit_square():
    return lambda **kw: make_problem(2, (0, 0), (1, 1), {"c11": "1", "c22": "1", **kw}, origin=(0.5, 0.5))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
