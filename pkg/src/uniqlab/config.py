"""INI configuration: ``[domain]``, ``[coefficients]``, ``[grid]`` and optional ``[analysis]``.

Example::

    [domain]
    dim = 1
    lower = 0
    upper = 1
    origin = 0.5

    [coefficients]
    c11 = x^2 * (1 - x)^2

    [grid]
    resolutions = 251, 501, 1001, 2001
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .grid import SHAPES, CoefficientSpec, DomainSpec, Problem, load_mask

ANALYSIS_DEFAULTS = {
    "r_max": 3.0,
    "n_radii": 40,
    "t": 0.1,
    "steps": 200,
    "tol_cap": 1e-2,
    "collars": (3, 2, 1),
    "seed": 0,
    "cacc_radius": None,
}

_DOMAIN_FLOATS = ("radius", "r_inner", "r_outer", "width", "rate", "axis")
_DOMAIN_VECTORS = ("center", "puncture")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}") from None


def parse_resolution(token: str):
    token = token.strip()
    try:
        if "x" in token:
            return tuple(int(v) for v in token.split("x"))
        return int(token)
    except ValueError:
        raise ConfigError(f"bad resolution {token!r}") from None


@dataclass(eq=False)
class Config:
    problem: Problem
    resolutions: list
    analysis: dict = field(default_factory=dict)
    source: str = ""

    @property
    def name(self) -> str:
        return self.problem.name


def parse_config(text: str, name: str = "custom", base_dir: Path | None = None) -> Config:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for sec in ("domain", "coefficients", "grid"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")

    d = cp["domain"]
    try:
        dim = int(d.get("dim", "1"))
    except ValueError:
        raise ConfigError("dim must be an integer") from None
    shape = d.get("shape", "box").strip()
    if shape not in SHAPES:
        raise ConfigError(f"unknown shape {shape!r}")
    lower = _floats(d.get("lower", " ".join(["0"] * dim)))
    upper = _floats(d.get("upper", " ".join(["1"] * dim)))
    if len(lower) == 1 and dim > 1:
        lower = lower * dim
    if len(upper) == 1 and dim > 1:
        upper = upper * dim
    origin = _floats(d["origin"]) if "origin" in d else None
    truncated = frozenset(t.strip() for t in d.get("truncated", "").replace(",", " ").split() if t.strip())
    params = {}
    for key in _DOMAIN_FLOATS:
        if key in d:
            params[key] = _floats(d[key])[0]
    for key in _DOMAIN_VECTORS:
        if key in d:
            params[key] = _floats(d[key])
    mask = None
    if shape == "mask":
        if "mask" not in d:
            raise ConfigError("shape = mask needs a mask file")
        path = Path(d["mask"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            mask = load_mask(path, dim)
        except OSError as exc:
            raise ConfigError(f"cannot read mask: {exc}") from None
    domain = DomainSpec(dim, lower, upper, shape, params, truncated, origin, mask)

    allowed = {f"c{k + 1}{l + 1}" for k in range(dim) for l in range(k, dim)}
    allowed |= {f"c{k + 1}" for k in range(dim)} | {"c0"}
    entries = {}
    for key, val in cp["coefficients"].items():
        if key not in allowed:
            raise ConfigError(f"unknown coefficient {key!r}; expected some of {sorted(allowed)}")
        entries[key] = val
    coeffs = CoefficientSpec(dim, entries, tag=name)

    g = cp["grid"]
    if "resolutions" in g:
        res = [parse_resolution(t) for t in g["resolutions"].split(",") if t.strip()]
    elif "resolution" in g:
        res = [parse_resolution(g["resolution"])]
    else:
        raise ConfigError("[grid] needs resolutions")

    analysis = dict(ANALYSIS_DEFAULTS)
    if cp.has_section("analysis"):
        a = cp["analysis"]
        for key in a:
            if key not in ANALYSIS_DEFAULTS:
                raise ConfigError(f"unknown analysis key {key!r}")
        try:
            for key in ("r_max", "t", "tol_cap", "cacc_radius"):
                if key in a:
                    analysis[key] = float(a[key])
            for key in ("n_radii", "steps", "seed"):
                if key in a:
                    analysis[key] = int(a[key])
            if "collars" in a:
                analysis["collars"] = tuple(int(v) for v in a["collars"].replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"bad [analysis] value: {exc}") from None
    return Config(Problem(domain, coeffs, name), res, analysis, text)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, name=path.stem, base_dir=path.parent)
