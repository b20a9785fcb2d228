"""uniqlab: grid-scale checks of L1 and Markov uniqueness for diffusion operators

    -div(C grad) + c . grad + c0

on a domain of R^d.  Every hypothesis (bounded metric balls, volume growth,
boundary capacity, the approximation condition C_A, the Dirichlet mass gap,
the lower-order bounds) is computed on refining grids and combined into
three-valued verdicts.
"""

from .config import Config, load_config, parse_config
from .errors import UniqlabError
from .grid import CoefficientField, CoefficientSpec, DomainSpec, Grid, Problem, build_grid, sample_coefficients
from .report import UniquenessReport, certify, emit
from .scenarios import SCENARIOS, scenario_config

__version__ = "0.1.0"

__all__ = [
    "Config", "load_config", "parse_config", "UniqlabError",
    "CoefficientField", "CoefficientSpec", "DomainSpec", "Grid", "Problem", "build_grid", "sample_coefficients",
    "UniquenessReport", "certify", "emit", "SCENARIOS", "scenario_config",
]
