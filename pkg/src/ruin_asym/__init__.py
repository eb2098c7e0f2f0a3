"""Second-order tail asymptotics of discounted aggregate claims, with and without by-claims."""

from .asym import AsymptoticBreakdown, Scenario
from .dist import DistributionError, Exponential, Pareto, PointMass, Tabulated, Weibull
from .renewal import DelayedMeasure, RenewalSpec

__version__ = "0.1.0"

__all__ = [
    "AsymptoticBreakdown", "Scenario", "DistributionError", "Exponential", "Pareto", "PointMass",
    "Tabulated", "Weibull", "DelayedMeasure", "RenewalSpec",
]
