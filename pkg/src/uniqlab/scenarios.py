"""Built-in scenario library, each a complete INI config."""

from __future__ import annotations

from .config import Config, parse_config
from .errors import UnknownScenario

_INTERVAL = """
[domain]
dim = 1
lower = 0
upper = 1
origin = 0.5

[coefficients]
c11 = {c11}
{extra}

[grid]
resolutions = 251, 501, 1001, 2001
"""

SCENARIOS: dict[str, str] = {
    "euclidean-square": """
[domain]
dim = 2
lower = 0 0
upper = 1 1
origin = 0.5 0.5

[coefficients]
c11 = 1
c22 = 1

[grid]
resolutions = 33, 65
""",
    "euclidean-plane-window": """
[domain]
dim = 2
lower = -4 -4
upper = 4 4
truncated = x1- x1+ x2- x2+
origin = 0 0

[coefficients]
c11 = 1
c22 = 1

[grid]
resolutions = 81, 161

[analysis]
r_max = 3.5
""",
    "interval-alpha0": _INTERVAL.format(c11="1", extra=""),
    "interval-alpha05": _INTERVAL.format(c11="x^0.5 * (1 - x)^0.5", extra=""),
    "interval-alpha1": _INTERVAL.format(c11="x * (1 - x)", extra=""),
    "interval-alpha2": _INTERVAL.format(c11="x^2 * (1 - x)^2", extra=""),
    "punctured-disk": """
[domain]
dim = 2
shape = punctured-disk
lower = -1 -1
upper = 1 1
radius = 1
puncture = 0 0
origin = 0.5 0

[coefficients]
c11 = 1
c22 = 1

[grid]
resolutions = 65, 129
""",
    "fast-metric-line": """
[domain]
dim = 1
lower = -10
upper = 10
truncated = x1- x1+
origin = 0

[coefficients]
c11 = (1 + x^2)^2

[grid]
resolutions = 1001, 2001

[analysis]
r_max = 3
""",
    "cusp-strip": """
[domain]
dim = 2
shape = cusp-strip
lower = -4 -1.05
upper = 4 1.05
truncated = x1- x1+
width = 1
rate = 0.5
origin = 0 0

[coefficients]
c11 = (1 + x1^2)^2
c22 = 1

[grid]
resolutions = 161x43, 321x85

[analysis]
r_max = 3
""",
    "drift-K-demo": _INTERVAL.format(c11="x^2 * (1 - x)^2", extra="c1 = x * (1 - x)\nc0 = 1"),
}


def scenario_config(name: str) -> Config:
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}")
    return parse_config(SCENARIOS[name], name=name)
