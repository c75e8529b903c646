"""Shared test helpers: an independent brute-force oracle and random inputs.

The oracle never touches the propagation machinery: it re-implements each
constraint's relation directly on integers and enumerates total assignments
over the declared initial domains.
"""

from __future__ import annotations

import itertools
import random

from gentra.constraints import ConstraintDecl
from gentra.fdomain import FiniteDomain
from gentra.solver import Problem
from gentra.trace import Trace, VirtualPayload


def _product(values):
    out = 1
    for v in values:
        out *= v
    return out


def constraint_holds(decl: ConstraintDecl, assignment: dict) -> bool:
    """Direct re-implementation of each constraint relation on integers."""
    if decl.kind == "element":
        ivar, values, vvar = decl.args
        idx = assignment[ivar] - decl.index_base
        return 0 <= idx < len(values) and values[idx] == assignment[vvar]
    if decl.kind == "eq":
        return assignment[decl.args[0]] == assignment[decl.args[1]]
    if decl.kind == "neq":
        return assignment[decl.args[0]] != assignment[decl.args[1]]
    if decl.kind == "eqc":
        return assignment[decl.args[0]] == decl.args[1]
    raise AssertionError(f"unknown kind {decl.kind}")


def oracle_solutions(problem: Problem) -> set:
    """All solutions by enumerating the initial-domain product."""
    names = [v for v, _ in problem.variables]
    domains = [list(d.values()) for _, d in problem.variables]
    out = set()
    for combo in itertools.product(*domains):
        assignment = dict(zip(names, combo))
        if not all(constraint_holds(d, assignment) for _, d in problem.constraints):
            continue
        if not all(any(constraint_holds(alt, assignment) for alt in alts)
                   for alts in problem.branches):
            continue
        out.add(tuple(sorted(assignment.items())))
    return out


def element_oracle(listing=(2, 5, 7), index_base=1) -> set:
    """Solutions of element(I, listing, A) under (A = I or A = 2).

    The unbounded declared ranges collapse for enumeration: the element
    relation can only hold when I is a valid index and A is a listed value,
    so those finite candidate sets cover every possible solution.
    """
    out = set()
    for i in range(index_base, index_base + len(listing)):
        for a in set(listing):
            if listing[i - index_base] != a:
                continue
            if a == i or a == 2:
                out.add((("A", a), ("I", i)))
    return out


def random_problem(rng: random.Random, max_vars: int = 4, universe: int = 8) -> Problem:
    """A small random problem: every variable is labelled, so solutions are
    total assignments comparable against the oracle."""
    nvars = rng.randint(1, max_vars)
    names = [f"x{i}" for i in range(nvars)]
    sizes = [rng.randint(1, universe) for _ in names]
    while 1 < nvars and _product(sizes) > 256:  # keep full labelling trees small
        i = max(range(nvars), key=lambda j: sizes[j])
        sizes[i] = max(1, sizes[i] - 1)
    variables = []
    for name, size in zip(names, sizes):
        variables.append((name, FiniteDomain.of(rng.sample(range(universe), size))))

    constraints = []
    for j in range(rng.randint(0, 3)):
        kind = rng.choice(["eq", "neq", "eqc", "element"])
        cid = f"c{j + 1}"
        if kind == "eqc" or nvars < 2:
            constraints.append((cid, ConstraintDecl.eqc(rng.choice(names), rng.randrange(universe))))
        elif kind == "element":
            ivar, vvar = rng.sample(names, 2)
            listing = tuple(rng.randrange(universe) for _ in range(rng.randint(2, 4)))
            constraints.append((cid, ConstraintDecl.element(ivar, listing, vvar)))
        elif kind == "eq":
            constraints.append((cid, ConstraintDecl.eq(*rng.sample(names, 2))))
        else:
            constraints.append((cid, ConstraintDecl.neq(*rng.sample(names, 2))))

    branches = ()
    if rng.random() < 0.35:
        v = rng.choice(names)
        branches = ((ConstraintDecl.eqc(v, rng.randrange(universe)),
                     ConstraintDecl.eqc(v, rng.randrange(universe))),)

    return Problem(variables=tuple(variables), constraints=tuple(constraints),
                   branches=branches, labels=tuple(names))


def solutions_as_set(result) -> set:
    return {tuple(sorted(assignment)) for assignment in result.solutions}


# small random traces for the trace-algebra laws

_STATES = ["s0", "s1"]
_EVENTS = [VirtualPayload(a, s) for a in ("a", "b", "c") for s in ("t0", "t1")]


def random_trace(rng: random.Random, max_events: int = 6) -> Trace:
    size = rng.randint(0, max_events)
    return Trace(rng.choice(_STATES), tuple(rng.choice(_EVENTS) for _ in range(size)))


def random_trace_set(rng: random.Random, max_traces: int = 5, max_events: int = 6) -> list[Trace]:
    return [random_trace(rng, max_events) for _ in range(rng.randint(0, max_traces))]
