"""Branch-and-bound for ``min c^T x + sqrt(x^T Q x)`` over integer points of a polytope."""

from .bnb import Problem, SolveParams, SolveResult, solve
from .instances import Instance, generate, read_instance, write_instance

__all__ = [
    "Instance",
    "Problem",
    "SolveParams",
    "SolveResult",
    "generate",
    "read_instance",
    "solve",
    "write_instance",
]
__version__ = "0.1.0"
