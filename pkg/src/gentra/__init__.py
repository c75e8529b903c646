"""Generic finite-domain solver traces.

A trace algebra, an observational replay semantics for the generic trace
format, two emitting solvers (a snapshot-based prototype and an
explanation-based simulator), and an abstraction toolkit that checks one
solver's traces against the format by projection, mapping, replay, and
simulation evidence.
"""

from .constraints import ConstraintDecl
from .fdomain import DEFAULT_MX, EMPTY_DOMAIN, FiniteDomain, full_domain
from .gentra4cp import GenericEvent, check_guards, make_semantics, validate
from .semantics import Action, ObservationalSemantics, check_faithful, extract, reconstruct
from .solver import Problem, SolveLimits, SolveResult, solve
from .state import BOTTOM, FullState, SolverEvent, SolverState, initial_state
from .trace import Segment, Trace, all_prefixes, domain_join, domain_meet

__all__ = [
    "Action",
    "BOTTOM",
    "ConstraintDecl",
    "DEFAULT_MX",
    "EMPTY_DOMAIN",
    "FiniteDomain",
    "FullState",
    "GenericEvent",
    "ObservationalSemantics",
    "Problem",
    "Segment",
    "SolveLimits",
    "SolveResult",
    "SolverEvent",
    "SolverState",
    "Trace",
    "all_prefixes",
    "check_faithful",
    "check_guards",
    "domain_join",
    "domain_meet",
    "extract",
    "full_domain",
    "initial_state",
    "make_semantics",
    "reconstruct",
    "solve",
    "validate",
]
