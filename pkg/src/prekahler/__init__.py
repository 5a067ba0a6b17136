"""Symbolic-numeric engine for potentials of degenerate closed (1,1)-forms
on complex surfaces: adapted coframes, structure invariants, kernel
filtrations, the induced symplectic connections, and the hypersurface lift.
"""

__version__ = "0.1.0"

from .coframe import (AdaptedCoframe, GeometryError, InvariantReport,
                      RankError, SingularityError, adapted_coframe, classify)
from .dsl import DslError, Domain, EvalError, builtin_potential, evaluate, parse

__all__ = [
    "AdaptedCoframe", "DslError", "Domain", "EvalError", "GeometryError",
    "InvariantReport", "RankError", "SingularityError", "adapted_coframe",
    "builtin_potential", "classify", "evaluate", "parse", "__version__",
]
