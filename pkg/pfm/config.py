# config.py

import os
import argparse
import dataclasses
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError


DATA_DIR_ENV = "PFM_DATA_DIR"


@dataclass(frozen=True)
class RunConfig:

    """
    Numerical and output settings shared by every stage of the pipeline.

    Parameters:
        precision (int): Working decimal precision P.
        terms (int): Initial series truncation N.
        tol (float): Target agreement between successive refinements.
        max_terms (int): Largest N tried before giving up.
        max_precision (int): Largest P tried before giving up.
        ratio_cap (float): Largest admissible hop ratio.
        ladder (float): Geometric growth factor of waypoint ladders.
        max_den (int): Denominator bound for rational reconstruction.
        rat_tol (float): Tolerance for rational reconstruction.
        jobs (int): Parallel workers for multi-case runs.
        json (bool): Emit JSON instead of tables.
        output (str, optional): Report destination.
    """

    precision: int = 60
    terms: int = 30
    tol: float = 1e-20
    max_terms: int = 1280
    max_precision: int = 200
    ratio_cap: float = 0.6
    ladder: float = 3.0
    max_den: int = 10**6
    rat_tol: float = 1e-20
    jobs: int = 1
    json: bool = False
    output: Optional[str] = None

    def __post_init__(self):
        if self.precision < 20:
            raise ConfigError(f"precision must be at least 20, got {self.precision}")
        if not self.tol > 10.0 ** (4 - self.precision):
            raise ConfigError(f"tol {self.tol:g} is below what precision {self.precision} can resolve")
        if not 0 < self.ratio_cap < 1:
            raise ConfigError(f"ratio_cap must lie in (0, 1), got {self.ratio_cap}")
        if self.ladder <= 1:
            raise ConfigError(f"ladder factor must exceed 1, got {self.ladder}")
        if self.terms < 4:
            raise ConfigError(f"terms must be at least 4, got {self.terms}")
        if self.max_terms < self.terms or self.max_precision < self.precision:
            raise ConfigError("resource budget is smaller than the starting values")
        if self.max_den < 1 or self.rat_tol <= 0 or self.jobs < 1:
            raise ConfigError("max_den, rat_tol and jobs must be positive")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        values = {k: v for k, v in vars(args).items() if k in fields and v is not None}
        return cls(**values)


def add_config_arguments(parser: argparse.ArgumentParser):
    defaults = RunConfig()
    parser.add_argument("--precision", type=int, default=defaults.precision, help="Working decimal precision")
    parser.add_argument("--terms", type=int, default=defaults.terms, help="Initial number of series terms")
    parser.add_argument("--tol", type=float, default=defaults.tol, help="Convergence tolerance")
    parser.add_argument("--max-terms", dest="max_terms", type=int, default=defaults.max_terms, help="Largest series truncation tried")
    parser.add_argument("--max-precision", dest="max_precision", type=int, default=defaults.max_precision, help="Largest precision tried")
    parser.add_argument("--ratio-cap", dest="ratio_cap", type=float, default=defaults.ratio_cap, help="Largest admissible hop ratio")
    parser.add_argument("--ladder", type=float, default=defaults.ladder, help="Growth factor of waypoint ladders")
    parser.add_argument("--max-den", dest="max_den", type=int, default=defaults.max_den, help="Denominator bound for rationalization")
    parser.add_argument("--rat-tol", dest="rat_tol", type=float, default=defaults.rat_tol, help="Tolerance for rationalization")
    parser.add_argument("--jobs", type=int, default=defaults.jobs, help="Parallel workers for multi-case runs")
    parser.add_argument("--json", action="store_true", help="Emit JSON instead of tables")
    parser.add_argument("--output", type=str, default=None, help="Write the report to this file")


def data_dir() -> str:
    default = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
    return os.environ.get(DATA_DIR_ENV, default)
