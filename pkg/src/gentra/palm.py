"""An explanation-based solver simulator with repair backtracking.

This machine differs from the snapshot prototype in three ways: at most one
constraint is active at a time, the pending solver events form an explicit
queue whose head is the one selected event, and every value removal carries
an *explanation*, the set of store constraints justifying it.  There is no
jump rule and no solved rule: search undoes decisions by deactivating the
responsible constraint and restoring exactly the values whose explanations
mention a relaxed constraint.

The element constraint is read 0-based here; ``palm_solve`` rebases its
input accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .constraints import ConstraintDecl
from .errors import GentraError, ReconstructionError, SolveLimitError, StateInvariantError, TransitionError
from .fdomain import EMPTY_DOMAIN, FiniteDomain
from .gentra4cp import GenericEvent
from .semantics import Action, ObservationalSemantics
from .solver import Problem, SolveLimits
from .state import (
    BOTTOM,
    SearchTreeState,
    SolverEvent,
    awake_condition,
    initial_tree,
)
from .trace import ActualPayload, Trace, VirtualPayload

PALM_EVENT_TYPES = (
    "newVariable", "newConstraint", "post", "newChild", "solution", "failure",
    "deactivate", "restore", "reduce", "suspend", "reject", "awake", "schedule",
)


class PalmAssertionError(GentraError):
    """A run-level property failed while simulating; carries the event index."""

    def __init__(self, index, prop, detail):
        self.index = index
        self.prop = prop
        super().__init__(f"{prop} failed at event {index}: {detail}")


def _lookup(pairs, key):
    for k, v in pairs:
        if k == key:
            return v
    return None


@dataclass(frozen=True)
class PalmSolverState:
    """Propagation state: single active pair, event queue split into head/tail,
    and the explanation map.  Explanations are stored per removal: each entry
    pairs a (variable, removed value set) with the constraint set justifying
    the removal, so wide interval removals never get enumerated value by
    value."""

    variables: tuple[str, ...] = ()
    constraints: tuple[tuple[str, ConstraintDecl | None], ...] = ()
    domains: tuple[tuple[str, FiniteDomain], ...] = ()
    initial_domains: tuple[tuple[str, FiniteDomain], ...] = ()
    active: tuple[tuple[str, SolverEvent], ...] = ()
    rejected: frozenset = frozenset()
    sleeping: frozenset = frozenset()
    q_head: SolverEvent | None = None
    q_tail: tuple[SolverEvent, ...] = ()
    explanations: tuple[tuple[str, FiniteDomain, frozenset], ...] = ()

    def domain(self, var):
        d = _lookup(self.domains, var)
        if d is None:
            raise StateInvariantError(f"undeclared variable {var!r}")
        return d

    def initial_domain(self, var):
        d = _lookup(self.initial_domains, var)
        if d is None:
            raise StateInvariantError(f"undeclared variable {var!r}")
        return d

    def declaration(self, cid):
        return _lookup(self.constraints, cid)

    def is_declared(self, cid):
        return any(k == cid for k, _ in self.constraints)

    def domain_map(self):
        return dict(self.domains)

    @property
    def active_ids(self):
        return frozenset(c for c, _ in self.active)

    def active_event(self, cid):
        return _lookup(self.active, cid)

    def explanation_of(self, var, value) -> frozenset | None:
        for v, vals, expl in self.explanations:
            if v == var and value in vals:
                return expl
        return None

    def with_domain(self, var, dom):
        return replace(self, domains=tuple((k, dom if k == var else v) for k, v in self.domains))

    def push_events(self, events):
        fresh = [e for e in events if e not in self.q_tail]
        if not fresh:
            return self
        return replace(self, q_tail=self.q_tail + tuple(fresh))


def palm_store(state: PalmSolverState) -> frozenset:
    parts = [state.active_ids, state.sleeping, state.rejected]
    union: set = set()
    total = 0
    for p in parts:
        total += len(p)
        union |= p
    if len(union) != total:
        raise StateInvariantError("store parts are not pairwise disjoint")
    return frozenset(union)


@dataclass(frozen=True)
class PalmState:
    solver: PalmSolverState
    tree: SearchTreeState


def palm_initial_state() -> PalmState:
    solver = PalmSolverState()
    return PalmState(solver=solver, tree=initial_tree(solver))


def dependence(state: PalmSolverState, cid: str, event: SolverEvent) -> bool:
    """Does the sleeping constraint depend on (react to) the event?

    Deliberately a separate definition from the generic wake condition; runs
    assert the two agree on every evaluated pair.
    """
    if cid not in state.sleeping:
        return False
    if event.kind == "bot":
        return True
    decl = state.declaration(cid)
    if decl is None:
        raise StateInvariantError(f"no declaration recorded for {cid!r}")
    return event.variable in decl.variables


def palm_watchers(state: PalmSolverState, event: SolverEvent) -> list[str]:
    return [c for c in sorted(state.sleeping) if dependence(state, c, event)]


def choice_point_palm(state: PalmSolverState) -> bool:
    return not state.active and not state.q_tail and not state.rejected


def solution_state_palm(state: PalmSolverState) -> bool:
    if state.rejected:
        return False
    sigma = palm_store(state)
    domains = state.domain_map()
    constrained: set = set()
    for cid in sigma:
        decl = state.declaration(cid)
        if decl is None:
            return False
        constrained.update(decl.variables)
    if any(not domains[v].is_singleton() for v in constrained):
        return False
    return all(state.declaration(cid).entailed(domains) for cid in sorted(sigma))


def broken_values(state: PalmSolverState, var: str) -> FiniteDomain:
    """Removed values of ``var`` whose explanation mentions a relaxed constraint."""
    sigma = palm_store(state)
    out = EMPTY_DOMAIN
    for v, vals, expl in state.explanations:
        if v == var and not expl <= sigma:
            out = out.union(vals)
    return out


# transition rules


def _need(cond, rule, text):
    if not cond:
        raise TransitionError(rule, text)


def _node_event(full: PalmState, act: Action, rule: str, pred) -> PalmState:
    node = act.get("node")
    _need(node not in full.tree.nodes, rule, f"node {node} already exists")
    _need(pred(full.solver), rule, f"state does not satisfy the {rule} predicate")
    depth = full.tree.depth(full.tree.current) + 1
    return replace(full, tree=full.tree.with_node(node, full.solver, depth))


def palm_step(full: PalmState, action: Action) -> PalmState:
    """Apply one rule of the explanation-based machine."""
    s = full.solver
    kind = action.kind

    if kind == "newVariable":
        var, dom = action.get("variable"), action.get("domain")
        _need(var not in s.variables, kind, f"{var} already declared")
        s2 = replace(s, variables=s.variables + (var,),
                     domains=s.domains + ((var, dom),),
                     initial_domains=s.initial_domains + ((var, dom),))
        return replace(full, solver=s2)

    if kind == "newConstraint":
        cid, decl = action.get("constraint"), action.get("decl")
        _need(not s.is_declared(cid), kind, f"{cid} already declared")
        if decl is not None:
            missing = [v for v in decl.variables if v not in s.variables]
            _need(not missing, kind, f"undeclared variables {missing}")
        return replace(full, solver=replace(s, constraints=s.constraints + ((cid, decl),)))

    if kind == "post":
        cid = action.get("constraint")
        _need(s.is_declared(cid), kind, f"{cid} not declared")
        _need(cid not in palm_store(s), kind, f"{cid} already in the store")
        _need(not s.active, kind, "another constraint is active")
        return replace(full, solver=replace(s, active=((cid, BOTTOM),)))

    if kind == "newChild":
        return _node_event(full, action, kind, choice_point_palm)

    if kind == "solution":
        return _node_event(full, action, kind, solution_state_palm)

    if kind == "failure":
        return _node_event(full, action, kind, lambda st: bool(st.rejected))

    if kind == "deactivate":
        cid = action.get("constraint")
        _need(cid in palm_store(s), kind, f"{cid} not in the store")
        s2 = replace(s, active=tuple(p for p in s.active if p[0] != cid),
                     sleeping=s.sleeping - {cid}, rejected=s.rejected - {cid})
        return replace(full, solver=s2)

    if kind == "restore":
        var, values = action.get("variable"), action.get("values")
        generated = action.get("generated", ())
        _need(var in s.variables, kind, f"{var} not declared")
        _need(not values.is_empty(), kind, "nothing to restore")
        _need(values.disjoint(s.domain(var)), kind, "restored values are still in the domain")
        broken = broken_values(s, var)
        _need(values.issubset(broken), kind, "restored values are not explained by relaxed constraints")
        kept = []
        for v, vals, expl in s.explanations:
            if v == var:
                vals = vals.subtract(values)
                if vals.is_empty():
                    continue
            kept.append((v, vals, expl))
        s2 = s.with_domain(var, s.domain(var).union(values))
        s2 = replace(s2, explanations=tuple(kept))
        s2 = s2.push_events(generated)
        return replace(full, solver=s2)

    if kind == "reduce":
        cid, var = action.get("constraint"), action.get("variable")
        removed, generated, cause = action.get("removed"), action.get("generated", ()), action.get("cause")
        explanation = action.get("explanation")
        _need(not s.rejected, kind, "a constraint is rejected")
        _need(s.active == ((cid, cause),), kind, f"({cid}, {cause}) is not the single active pair")
        decl = s.declaration(cid)
        _need(decl is not None, kind, f"no declaration recorded for {cid}")
        _need(var in decl.variables, kind, f"{var} is not a variable of {cid}")
        _need(not removed.is_empty(), kind, "nothing to remove")
        _need(removed.issubset(s.domain(var)), kind, "removed values are not all in the domain")
        _need(explanation is not None and explanation <= palm_store(s), kind,
              "explanation is not a set of store constraints")
        s2 = s.with_domain(var, s.domain(var).subtract(removed)).push_events(generated)
        new_expl = s2.explanations + ((var, removed, explanation),)
        return replace(full, solver=replace(s2, explanations=new_expl))

    if kind == "suspend":
        cid = action.get("constraint")
        pair = s.active_event(cid)
        _need(pair is not None, kind, f"{cid} is not active")
        s2 = replace(s, active=(), sleeping=s.sleeping | {cid})
        return replace(full, solver=s2)

    if kind == "reject":
        cid = action.get("constraint")
        pair = s.active_event(cid)
        _need(pair is not None, kind, f"{cid} is not active")
        cause = action.get("cause")
        if cause is not None:
            _need(pair == cause, kind, "recorded cause does not match the active pair")
        decl = s.declaration(cid)
        _need(decl is not None, kind, f"no declaration recorded for {cid}")
        _need(any(s.domain(v).is_empty() for v in decl.variables), kind,
              "no variable of the constraint has an empty domain")
        return replace(full, solver=replace(s, active=(), rejected=s.rejected | {cid}))

    if kind == "awake":
        cid, cause = action.get("constraint"), action.get("cause")
        _need(not s.active, kind, "another constraint is active")
        _need(not s.rejected, kind, "a constraint is rejected")
        _need(cid in s.sleeping, kind, f"{cid} is not sleeping")
        _need(cause == BOTTOM or cause == s.q_head, kind,
              "waking event is neither bot nor the queue head")
        _need(dependence(s, cid, cause), kind, f"{cid} does not depend on {cause}")
        return replace(full, solver=replace(s, active=((cid, cause),), sleeping=s.sleeping - {cid}))

    if kind == "schedule":
        event = action.get("event")
        _need(not s.active, kind, "a constraint is active")
        _need(not s.rejected, kind, "a constraint is rejected")
        _need(event in s.q_tail, kind, f"{event} is not queued")
        _need(bool(s.sleeping), kind, "no sleeping constraint")
        _need(bool(palm_watchers(s, event)), kind, "no sleeping constraint depends on the event")
        idx = s.q_tail.index(event)
        s2 = replace(s, q_head=event, q_tail=s.q_tail[:idx] + s.q_tail[idx + 1:])
        return replace(full, solver=s2)

    raise TransitionError(kind, "unknown rule")


# extraction and reconstruction (the trace dialect keeps explanations and
# annotates reduces with the dominant effect of the removal)


def wake_kind_of(old: FiniteDomain, new: FiniteDomain) -> str:
    if new.is_empty():
        return "empty"
    if new.is_singleton() and not old.is_singleton():
        return "val"
    min_moved = new.min_value() != old.min_value()
    max_moved = new.max_value() != old.max_value()
    if min_moved and not max_moved:
        return "min"
    if max_moved and not min_moved:
        return "max"
    return "dom"


def palm_extract(full: PalmState, action: Action, new: PalmState) -> GenericEvent:
    kind = action.kind
    depth = new.tree.depth(new.tree.current)
    s, s2 = full.solver, new.solver
    if kind == "newVariable":
        var = action.get("variable")
        return GenericEvent(kind, depth, variable=var, domain=s2.domain(var))
    if kind == "newConstraint":
        cid = action.get("constraint")
        return GenericEvent(kind, depth, constraint=cid, decl=s2.declaration(cid))
    if kind in ("post", "deactivate", "suspend"):
        return GenericEvent(kind, depth, constraint=action.get("constraint"))
    if kind in ("newChild", "solution", "failure"):
        return GenericEvent(kind, depth, node=action.get("node"))
    if kind == "restore":
        var = action.get("variable")
        values = s2.domain(var).subtract(s.domain(var))
        return GenericEvent(kind, depth, variable=var, domain=values,
                            generated=s2.q_tail[len(s.q_tail):] or None)
    if kind == "reduce":
        var = action.get("variable")
        old, cur = s.domain(var), s2.domain(var)
        return GenericEvent(kind, depth, constraint=action.get("constraint"), variable=var,
                            domain=old.subtract(cur), generated=s2.q_tail[len(s.q_tail):],
                            cause=action.get("cause"),
                            explanation=tuple(sorted(action.get("explanation"))),
                            wake_kind=wake_kind_of(old, cur))
    if kind in ("reject", "awake"):
        return GenericEvent(kind, depth, constraint=action.get("constraint"), cause=action.get("cause"))
    if kind == "schedule":
        return GenericEvent(kind, depth, event=action.get("event"))
    raise TransitionError(kind, "unknown rule")


def palm_reconstruct(full: PalmState, ev: GenericEvent) -> tuple[Action, PalmState]:
    s = full.solver
    kind = ev.type

    def fail(text):
        raise ReconstructionError(kind, text)

    if kind == "newVariable":
        action = Action.of(kind, variable=ev.variable, domain=ev.domain)
    elif kind == "newConstraint":
        action = Action.of(kind, constraint=ev.constraint, decl=ev.decl)
    elif kind in ("post", "deactivate", "suspend"):
        action = Action.of(kind, constraint=ev.constraint)
    elif kind in ("newChild", "solution", "failure"):
        action = Action.of(kind, node=ev.node)
    elif kind == "restore":
        gen = tuple(SolverEvent(e.kind, e.variable) for e in ev.generated or ())
        action = Action.of(kind, variable=ev.variable, values=ev.domain, generated=gen)
    elif kind == "reduce":
        pair = s.active_event(ev.constraint)
        if pair is None:
            fail(f"{ev.constraint} is not active")
        if ev.cause is not None and not pair.matches(ev.cause.kind, ev.cause.variable):
            fail("recorded cause does not match the active pair")
        if ev.explanation is None:
            fail("reduce record carries no explanation")
        gen = tuple(SolverEvent(e.kind, e.variable, ev.constraint) for e in ev.generated or ())
        action = Action.of(kind, constraint=ev.constraint, variable=ev.variable, removed=ev.domain,
                           generated=gen, cause=pair, explanation=frozenset(ev.explanation))
    elif kind == "reject":
        pair = s.active_event(ev.constraint)
        if pair is None:
            fail(f"{ev.constraint} is not active")
        action = Action.of(kind, constraint=ev.constraint, cause=pair)
    elif kind == "awake":
        if ev.cause is None or ev.cause.kind == "bot":
            cause = BOTTOM
        elif s.q_head is not None and s.q_head.matches(ev.cause.kind, ev.cause.variable):
            cause = s.q_head
        else:
            fail("recorded cause is not the queue head")
        action = Action.of(kind, constraint=ev.constraint, cause=cause)
    elif kind == "schedule":
        matches = [e for e in s.q_tail if e.matches(ev.event.kind, ev.event.variable)]
        if not matches:
            fail(f"no queued event matches {ev.event.kind} {ev.event.variable}")
        action = Action.of(kind, event=matches[0])
    else:
        fail("event type outside the dialect")

    try:
        new = palm_step(full, action)
    except TransitionError as exc:
        raise ReconstructionError(exc.rule, exc.condition) from exc
    return action, new


def is_palm_initial(full: PalmState) -> bool:
    return full == palm_initial_state()


def make_palm_semantics() -> ObservationalSemantics:
    return ObservationalSemantics(
        name="palm",
        action_kinds=frozenset(PALM_EVENT_TYPES),
        apply=palm_step,
        extract_local=palm_extract,
        reconstruct_local=palm_reconstruct,
        is_initial=is_palm_initial,
        is_state=lambda s: isinstance(s, PalmState),
        is_record=lambda r: isinstance(r, GenericEvent),
    )


# run-level property checks


def check_palm_invariants(state: PalmSolverState, check_explanations: bool = True) -> None:
    if len(state.active) > 1:
        raise StateInvariantError("more than one active pair")
    palm_store(state)
    for var, vals, expl in state.explanations:
        if not vals.disjoint(state.domain(var)):
            raise StateInvariantError(f"explained values of {var} are still in its domain")
    if check_explanations:
        sigma = palm_store(state)
        for var, vals, expl in state.explanations:
            if not expl <= sigma:
                raise StateInvariantError(f"an explanation for {var} mentions relaxed constraints")


# the solver


@dataclass
class _Frame:
    alternatives: tuple[ConstraintDecl, ...]
    position: int
    index: int = 0
    bc: str | None = None


@dataclass(frozen=True)
class PalmSolveResult:
    solutions: tuple
    events: tuple[GenericEvent, ...]
    virtual: Trace
    property_log: tuple

    @property
    def actual_trace(self) -> Trace:
        return Trace(self.virtual.initial_state, tuple(ActualPayload(e) for e in self.events))

    def solution_dicts(self):
        return [dict(s) for s in self.solutions]


class _PalmRun:
    def __init__(self, limits: SolveLimits, problem_ids: frozenset = frozenset()):
        self.full = palm_initial_state()
        self.limits = limits
        self.problem_ids = problem_ids
        self.events: list[GenericEvent] = []
        self.steps: list[VirtualPayload] = []
        self.log: list[tuple] = []
        self.next_node = 1
        self.next_branch = 1

    @property
    def solver(self):
        return self.full.solver

    def emit(self, action: Action) -> None:
        if len(self.events) >= self.limits.max_events:
            raise SolveLimitError(f"event budget {self.limits.max_events} exceeded", self.events)
        index = len(self.events)
        self._assert_properties(index, action)
        new = palm_step(self.full, action)
        self.events.append(palm_extract(self.full, action, new))
        self.steps.append(VirtualPayload(action, new))
        self.full = new
        relaxing = action.kind in ("deactivate", "restore", "failure")
        try:
            check_palm_invariants(new.solver, check_explanations=not relaxing)
        except StateInvariantError as exc:
            raise PalmAssertionError(index, "state-invariant", str(exc)) from exc

    def _assert_properties(self, index: int, action: Action) -> None:
        s = self.solver
        if action.kind == "awake":
            cid, cause = action.get("constraint"), action.get("cause")
            dep = dependence(s, cid, cause)
            aw = awake_condition(s, cid, cause)
            self.log.append((index, "p1", dep == aw))
            if dep != aw:
                raise PalmAssertionError(index, "p1", f"dependence != wake condition for ({cid}, {cause})")
        elif action.kind == "schedule":
            event = action.get("event")
            ok = bool(palm_watchers(s, event))
            self.log.append((index, "p2", ok))
            if not ok:
                raise PalmAssertionError(index, "p2", f"no constraint reacts to selected event {event}")
        elif action.kind == "reject":
            cid = action.get("constraint")
            decl = s.declaration(cid)
            ok = decl is not None and decl.falsified(s.domain_map())
            self.log.append((index, "p3", ok))
            if not ok:
                raise PalmAssertionError(index, "p3", f"empty domain without falsified({cid})")

    def fresh_node(self) -> int:
        if self.next_node > self.limits.max_nodes:
            raise SolveLimitError(f"node budget {self.limits.max_nodes} exceeded", self.events)
        n = self.next_node
        self.next_node += 1
        return n

    def fresh_branch_id(self) -> str:
        cid = f"bc{self.next_branch}"
        self.next_branch += 1
        return cid


def _problem_watches(run: _PalmRun, var: str) -> bool:
    return any(
        decl is not None and var in decl.variables
        for cid, decl in run.solver.constraints
        if cid in run.problem_ids
    )


def _observed_events(run: _PalmRun, cid, var, old, new):
    """Queue a change notification only when a problem constraint observes it.

    Branch constraints may be relaxed permanently, so events only they could
    consume would sit in the queue forever; problem constraints always come
    back to the store, which keeps every queued event consumable.
    """
    if not _problem_watches(run, var):
        return ()
    out = []
    for kind in ("dom", "min", "max", "val"):
        if kind == "dom":
            fire = old != new
        elif new.is_empty():
            fire = False
        elif kind == "min":
            fire = new.min_value() != old.min_value()
        elif kind == "max":
            fire = new.max_value() != old.max_value()
        else:
            fire = new.is_singleton() and not old.is_singleton()
        if fire:
            ev = SolverEvent(kind, var, cid)
            if ev not in run.solver.q_tail:
                out.append(ev)
    return tuple(out)


def _explanation_for(run: _PalmRun, cid: str, var: str) -> frozenset:
    """The active constraint plus the explanations of the sibling-domain facts
    its filtering consulted."""
    decl = run.solver.declaration(cid)
    out = {cid}
    for v, _vals, expl in run.solver.explanations:
        if v in decl.variables and v != var:
            out |= expl
    return frozenset(out)


def _handle_palm_active(run: _PalmRun, cid: str, cause: SolverEvent) -> None:
    decl = run.solver.declaration(cid)
    changed = True
    while changed:
        changed = False
        for var in decl.variables:
            old = run.solver.domain(var)
            removed = old.subtract(decl.supported(var, run.solver.domain_map()))
            if removed.is_empty():
                continue
            new = old.subtract(removed)
            run.emit(Action.of("reduce", constraint=cid, variable=var, removed=removed,
                               generated=_observed_events(run, cid, var, old, new), cause=cause,
                               explanation=_explanation_for(run, cid, var)))
            changed = True
            if new.is_empty():
                run.emit(Action.of("reject", constraint=cid, cause=cause))
                return
    run.emit(Action.of("suspend", constraint=cid))


def palm_propagate(run: _PalmRun) -> None:
    """Drain the queue: schedule each consumable event, wake its dependents
    in identifier order, and filter each woken constraint.  Events whose
    observers are temporarily out of the store are left queued."""
    skip = 0
    while True:
        s = run.solver
        if s.rejected:
            return
        if s.active:
            cid, cause = s.active[0]
            _handle_palm_active(run, cid, cause)
            continue
        if skip < len(s.q_tail):
            event = s.q_tail[skip]
            woken = palm_watchers(s, event)
            if not woken:
                skip += 1
                continue
            run.emit(Action.of("schedule", event=event))
            for cid in woken:
                if run.solver.rejected:
                    break
                run.emit(Action.of("awake", constraint=cid, cause=event))
                _handle_palm_active(run, cid, event)
            skip = 0
            continue
        return


def _emit_restores(run: _PalmRun) -> None:
    """Return every value whose justification broke; each restored variable
    announces one dom event, provided a problem constraint observes it."""
    for var in run.solver.variables:
        values = broken_values(run.solver, var)
        if values.is_empty():
            continue
        gen = ()
        if _problem_watches(run, var):
            ev = SolverEvent("dom", var)
            if ev not in run.solver.q_tail:
                gen = (ev,)
        run.emit(Action.of("restore", variable=var, values=values, generated=gen))


def _next_palm_choice(run: _PalmRun, strategy, position):
    if position >= len(strategy):
        return None
    kind, payload = strategy[position]
    if kind == "branch":
        return tuple(payload)
    dom = run.solver.domain(payload)
    if dom.is_empty():
        return None
    if dom.size() > 4096:
        raise SolveLimitError(f"labelling {payload} over {dom.size()} values", run.events)
    return tuple(ConstraintDecl.eqc(payload, v) for v in dom.values())


def palm_solve(problem: Problem, limits: SolveLimits | None = None) -> PalmSolveResult:
    """Run the explanation-based machine on a problem (element read 0-based).

    Search posts branch constraints like the prototype but never jumps:
    abandoning an alternative deactivates its constraint and restores every
    value whose explanation involved it.  The run asserts the machine's
    properties at each step (wake-condition agreement, selected events have
    dependents, rejection implies falsity) and aborts on violation.
    """
    problem = problem.rebased(0)
    problem_ids = frozenset(cid for cid, _ in problem.constraints)
    run = _PalmRun(limits or SolveLimits(), problem_ids)
    start = run.full
    for var, dom in problem.variables:
        run.emit(Action.of("newVariable", variable=var, domain=dom))

    posts: list[tuple[str, ConstraintDecl | None]] = list(problem.constraints)
    strategy = [("branch", alts) for alts in problem.branches]
    strategy += [("label", v) for v in problem.labels]
    frames: list[_Frame] = []
    repost: list[str] = []
    solutions: list = []

    def enter_alternative(frame: _Frame) -> None:
        frame.bc = run.fresh_branch_id()
        for cid in repost:
            posts.append((cid, None))
        repost.clear()
        posts.append((frame.bc, frame.alternatives[frame.index]))

    def advance() -> bool:
        while frames:
            frame = frames[-1]
            if frame.bc is not None and frame.bc in palm_store(run.solver):
                run.emit(Action.of("deactivate", constraint=frame.bc))
                _emit_restores(run)
            frame.index += 1
            if frame.index < len(frame.alternatives):
                enter_alternative(frame)
                return True
            frames.pop()
        return False

    while True:
        if run.solver.rejected:
            run.emit(Action.of("failure", node=run.fresh_node()))
            if not any(f.index + 1 < len(f.alternatives) for f in frames):
                break
            # drop postings queued for the abandoned alternative, keeping
            # problem constraints that still await their return to the store
            for cid, _decl in posts:
                if cid in problem_ids and cid not in repost and cid not in palm_store(run.solver):
                    repost.append(cid)
            posts.clear()
            c_rej = sorted(run.solver.rejected)[0]
            run.emit(Action.of("deactivate", constraint=c_rej))
            _emit_restores(run)
            if c_rej in problem_ids and c_rej not in repost:
                repost.append(c_rej)
            if not advance():
                break
            continue
        if posts:
            cid, decl = posts.pop(0)
            if decl is not None and not run.solver.is_declared(cid):
                run.emit(Action.of("newConstraint", constraint=cid, decl=decl))
            run.emit(Action.of("post", constraint=cid))
            palm_propagate(run)
            continue
        position = frames[-1].position + 1 if frames else 0
        alternatives = _next_palm_choice(run, strategy, position)
        if alternatives is not None:
            run.emit(Action.of("newChild", node=run.fresh_node()))
            frames.append(_Frame(alternatives, position))
            enter_alternative(frames[-1])
            continue
        if solution_state_palm(run.solver):
            run.emit(Action.of("solution", node=run.fresh_node()))
            assignment = tuple(
                (v, run.solver.domain(v).singleton_value())
                for v in run.solver.variables
                if run.solver.domain(v).is_singleton()
            )
            solutions.append(assignment)
        if not advance():
            break

    virtual = Trace(start, tuple(run.steps))
    return PalmSolveResult(solutions=tuple(solutions), events=tuple(run.events),
                           virtual=virtual, property_log=tuple(run.log))
