"""Normal forms, KAM steps and resonance experiments for exact symplectic twist maps of the annulus."""

from .errors import NumericalError
from .series import FourierTaylorSeries, RadialSeries, StripParams
from .maps import GeneratingMap, PhasePoint, standard_map, twist_map
from .bnf import bnf_direct, bnf_quantified
from .kam import KamState, kam_iterate, kam_step
from .small_divisors import GOLDEN, ResonanceZone, solve_cohomological
from .resonance import pendulum_reduce, residue_check
from .potential import HoleDomain, harmonic_measure_mc, jensen_bound
from .measure import classify_orbit, find_periodic_orbit, measure_scan

__version__ = "0.1.0"

__all__ = [
    "NumericalError",
    "FourierTaylorSeries",
    "RadialSeries",
    "StripParams",
    "GeneratingMap",
    "PhasePoint",
    "standard_map",
    "twist_map",
    "bnf_direct",
    "bnf_quantified",
    "KamState",
    "kam_iterate",
    "kam_step",
    "GOLDEN",
    "ResonanceZone",
    "solve_cohomological",
    "pendulum_reduce",
    "residue_check",
    "HoleDomain",
    "harmonic_measure_mc",
    "jensen_bound",
    "classify_orbit",
    "find_periodic_orbit",
    "measure_scan",
]
