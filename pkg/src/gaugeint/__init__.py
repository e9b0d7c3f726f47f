"""
Gauge integrals on boxes and their Dunford extensions to bounded sets.

The McShane and Henstock-Kurzweil integrals are computed by sweeping a
family of gauges over exact dyadic tagged partitions.  On a bounded set
``G`` with null boundary the Dunford-McShane and Dunford-Henstock-Kurzweil
integrals come by two routes (zero extension over a box, or a series over a
division of the interior) together with falsification checks of the
Dunford-function and negligible-variation conditions.
"""

from .catalog import CATALOG, Integrand, build, bundle, lincomb
from .divisions import Disk, Division, dyadic_division
from .dunford import (
    SETS,
    DomainSpec,
    DunfordIntegralResult,
    dhk_integral_extension,
    dhk_integral_piecewise,
    dm_integral_extension,
    dm_integral_piecewise,
    fremlin_t222_check,
    linearity_check,
    zero_extend,
)
from .geometry import Interval, IntervalAlgebraSet, VectorValue, parse_box, set_normalize
from .integrators import (
    IntegralResult,
    NoConvergence,
    dunford_componentwise_check,
    hk_integral,
    integral,
    mcshane_integral,
    primitive_of,
)

__version__ = "0.1.0"

__all__ = [
    "CATALOG",
    "Disk",
    "Division",
    "DomainSpec",
    "DunfordIntegralResult",
    "IntegralResult",
    "Integrand",
    "Interval",
    "IntervalAlgebraSet",
    "NoConvergence",
    "SETS",
    "VectorValue",
    "build",
    "bundle",
    "dhk_integral_extension",
    "dhk_integral_piecewise",
    "dm_integral_extension",
    "dm_integral_piecewise",
    "dunford_componentwise_check",
    "dyadic_division",
    "fremlin_t222_check",
    "hk_integral",
    "integral",
    "lincomb",
    "linearity_check",
    "mcshane_integral",
    "parse_box",
    "primitive_of",
    "set_normalize",
    "zero_extend",
]
