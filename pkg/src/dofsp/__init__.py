"""Private distributed optimization over intersected feasible sets.

Two-party, ring and star search protocols with symbol-level cost
accounting, closed-form equality probabilities and exhaustive audits.
"""

from .model import (
    Alphabet,
    AssumptionViolation,
    EmptyIntersectionError,
    FeasibleSet,
    Instance,
    Objective,
    global_profile,
    intersection_oracle,
    load_instances,
    local_profile,
    solution_oracle,
)
from .ring import naive_psi_ring, run_ring
from .star import naive_psi_star, run_star
from .transcript import Outcome, Transcript
from .two_party import naive_psi_two_party, run_two_party

__all__ = [
    "Alphabet",
    "AssumptionViolation",
    "EmptyIntersectionError",
    "FeasibleSet",
    "Instance",
    "Objective",
    "Outcome",
    "Transcript",
    "global_profile",
    "intersection_oracle",
    "load_instances",
    "local_profile",
    "naive_psi_ring",
    "naive_psi_star",
    "naive_psi_two_party",
    "run_ring",
    "run_star",
    "run_two_party",
    "solution_oracle",
]
__version__ = "0.1.0"
