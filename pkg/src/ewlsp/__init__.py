"""Solvers and verification tools for the economic warehouse lot scheduling
problem: exact policy evaluation, the classic 2-approximation, a randomized
sub-2 pipeline built on power-of-2 rounding and paired schedules, a small-n
grid-aligned dynamic program, and brute-force oracles."""

from .errors import (
    BudgetExceeded,
    IncommensurateIntervals,
    InfeasibleMatching,
    NotAPowerOfTwo,
    SchemaError,
    SearchSpaceExceeded,
    SpaceMismatch,
    StateSpaceExceeded,
)
from .evaluator import EvalReport, average_space, evaluate, evaluate_sosi, inventory_at
from .model import (
    Commodity,
    CyclicPolicy,
    Instance,
    RandomizedPolicy,
    SosiPolicy,
    parse_instance,
    parse_policy,
    serialize_instance,
    serialize_policy,
    sosi_to_cyclic,
)

__all__ = [
    "BudgetExceeded",
    "Commodity",
    "CyclicPolicy",
    "EvalReport",
    "IncommensurateIntervals",
    "InfeasibleMatching",
    "Instance",
    "NotAPowerOfTwo",
    "RandomizedPolicy",
    "SchemaError",
    "SearchSpaceExceeded",
    "SosiPolicy",
    "SpaceMismatch",
    "StateSpaceExceeded",
    "average_space",
    "evaluate",
    "evaluate_sosi",
    "inventory_at",
    "parse_instance",
    "parse_policy",
    "serialize_instance",
    "serialize_policy",
    "sosi_to_cyclic",
]
