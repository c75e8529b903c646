"""The generic finite-domain solver trace format.

Fifteen event types describe a solver run.  Control events build and
navigate the search tree and manage declarations:

    newVariable v D     declare a variable with its initial domain
    newConstraint c     declare a constraint
    post c              activate a declared constraint (paired with bot)
    newChild n          open a child node at a quiescent state
    jumpTo n n'         make node n current and restore its snapshot
    solution n          close a branch at a solution state
    failure n           close a branch at a failed state
    deactivate c        drop a constraint from the store
    restore v D         return removed values to a domain

Propagation events narrate domain filtering:

    reduce c v a- D a   remove D from v's domain on behalf of (c, a),
                        generating the solver events a-
    suspend c           put the active constraint to sleep
    solved c            retire an entailed active constraint
    reject c a          retire an unsatisfiable active constraint
    awake c a           activate a sleeping constraint for event a
    schedule a          pick a pending solver event for propagation

This module implements each rule as a state transformer with explicit
precondition checks, the extraction of attribute records from transitions,
the reconstruction of transitions from records (used to replay and validate
foreign traces), and the run-level guard checks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .constraints import ConstraintDecl
from .errors import ReconstructionError, TransitionError
from .fdomain import FiniteDomain
from .semantics import Action, ObservationalSemantics
from .state import (
    BOTTOM,
    FullState,
    SolverEvent,
    SolverState,
    awake_condition,
    choice_point,
    failure_state,
    initial_state,
    schedulable,
    solution_state,
    store,
)
from .trace import Trace, VirtualPayload

CONTROL_TYPES = (
    "newVariable", "newConstraint", "post", "newChild", "jumpTo",
    "solution", "failure", "deactivate", "restore",
)
PROPAGATION_TYPES = ("reduce", "suspend", "solved", "reject", "awake", "schedule")
EVENT_TYPES = CONTROL_TYPES + PROPAGATION_TYPES

GUARD_NAMES = ("g1", "g2", "g3", "g4", "g5")
DEFAULT_GUARDS = ("g1", "g2", "g3")


@dataclass(frozen=True)
class GenericEvent:
    """One actual-trace record: an event type, its depth, and typed attributes.

    Only the attributes proper to the type are populated; dialect extras
    (explanations, wake-kind annotations, source-name aliases) ride along in
    dedicated optional fields so parsers can preserve them.
    """

    type: str
    depth: int = 0
    constraint: str | None = None
    variable: str | None = None
    node: int | None = None
    node2: int | None = None
    domain: FiniteDomain | None = None
    generated: tuple[SolverEvent, ...] | None = None
    cause: SolverEvent | None = None
    event: SolverEvent | None = None
    decl: ConstraintDecl | None = None
    decl_text: str | None = None
    explanation: tuple[str, ...] | None = None
    wake_kind: str | None = None
    var_alias: str | None = None


# required / optional attribute fields per event type (strict shape)
_SHAPES = {
    "newVariable": (("variable", "domain"), ("var_alias",)),
    "newConstraint": (("constraint",), ("decl", "decl_text")),
    "post": (("constraint",), ()),
    "newChild": (("node",), ()),
    "jumpTo": (("node", "node2"), ()),
    "solution": (("node",), ()),
    "failure": (("node",), ()),
    "deactivate": (("constraint",), ()),
    "restore": (("variable", "domain"), ("generated",)),
    "reduce": (("constraint", "variable", "generated", "domain", "cause"), ()),
    "suspend": (("constraint",), ()),
    "solved": (("constraint",), ()),
    "reject": (("constraint", "cause"), ()),
    "awake": (("constraint", "cause"), ()),
    "schedule": (("event",), ("constraint",)),
}

_ALL_ATTRS = ("constraint", "variable", "node", "node2", "domain",
              "generated", "cause", "event", "decl", "decl_text")


def shape_error(ev: GenericEvent, strict: bool = True) -> str | None:
    """Return a description of the first shape violation, or None.

    In lenient mode missing attributes are tolerated (foreign traces omit
    generated events, causes, and node identifiers); attributes foreign to
    the event type are rejected in both modes.
    """
    if ev.type not in _SHAPES:
        return f"unknown event type {ev.type!r}"
    required, optional = _SHAPES[ev.type]
    allowed = set(required) | set(optional)
    for name in _ALL_ATTRS:
        if getattr(ev, name) is not None and name not in allowed:
            return f"attribute {name!r} does not belong to {ev.type}"
    if strict:
        for name in required:
            if getattr(ev, name) is None:
                return f"missing required attribute {name!r}"
    return None


def generated_events(var: str, old: FiniteDomain, new: FiniteDomain, origin: str | None) -> tuple[SolverEvent, ...]:
    """The solver events a domain change produces.

    A change always signals ``dom``; ``min``/``max`` fire when the respective
    bound moved, ``val`` when the domain became a singleton.  An emptied
    domain signals ``dom`` only (there is no bound left to report).
    """
    if old == new:
        return ()
    out = [SolverEvent("dom", var, origin)]
    if not new.is_empty():
        if new.min_value() != old.min_value():
            out.append(SolverEvent("min", var, origin))
        if new.max_value() != old.max_value():
            out.append(SolverEvent("max", var, origin))
        if new.is_singleton() and not old.is_singleton():
            out.append(SolverEvent("val", var, origin))
    return tuple(out)


# transition rules


def _need(cond: bool, rule: str, text: str):
    if not cond:
        raise TransitionError(rule, text)


def _step_new_variable(full: FullState, act: Action) -> FullState:
    var, dom = act.get("variable"), act.get("domain")
    s = full.solver
    _need(var not in s.variables, "newVariable", f"{var} already declared")
    s2 = replace(
        s,
        variables=s.variables + (var,),
        domains=s.domains + ((var, dom),),
        initial_domains=s.initial_domains + ((var, dom),),
    )
    return replace(full, solver=s2)


def _step_new_constraint(full: FullState, act: Action) -> FullState:
    cid, decl = act.get("constraint"), act.get("decl")
    s = full.solver
    _need(not s.is_declared(cid), "newConstraint", f"{cid} already declared")
    if decl is not None:
        missing = [v for v in decl.variables if v not in s.variables]
        _need(not missing, "newConstraint", f"undeclared variables {missing}")
    return replace(full, solver=replace(s, constraints=s.constraints + ((cid, decl),)))


def _step_post(full: FullState, act: Action) -> FullState:
    cid = act.get("constraint")
    s = full.solver
    _need(s.is_declared(cid), "post", f"{cid} not declared")
    _need(cid not in store(s), "post", f"{cid} already in the store")
    return replace(full, solver=replace(s, active=s.active + ((cid, BOTTOM),)))


def _node_event(full: FullState, act: Action, rule: str, state_pred) -> FullState:
    node = act.get("node")
    _need(node not in full.tree.nodes, rule, f"node {node} already exists")
    _need(state_pred(full.solver), rule, f"state does not satisfy the {rule} predicate")
    depth = full.tree.depth(full.tree.current) + 1
    return replace(full, tree=full.tree.with_node(node, full.solver, depth))


def _step_new_child(full: FullState, act: Action) -> FullState:
    return _node_event(full, act, "newChild", choice_point)


def _step_solution(full: FullState, act: Action) -> FullState:
    return _node_event(full, act, "solution", solution_state)


def _step_failure(full: FullState, act: Action) -> FullState:
    return _node_event(full, act, "failure", failure_state)


def _step_jump_to(full: FullState, act: Action) -> FullState:
    node = act.get("node")
    _need(node in full.tree.nodes, "jumpTo", f"unknown node {node}")
    _need(node != full.tree.current, "jumpTo", "target is already the current node")
    snap = full.tree.snapshot(node)
    _need(choice_point(snap), "jumpTo", f"node {node} is not a choice point")
    return FullState(solver=snap, tree=full.tree.jumped_to(node))


def _step_deactivate(full: FullState, act: Action) -> FullState:
    cid = act.get("constraint")
    s = full.solver
    _need(cid in store(s), "deactivate", f"{cid} not in the store")
    s2 = replace(
        s,
        active=tuple(p for p in s.active if p[0] != cid),
        sleeping=s.sleeping - {cid},
        solved=s.solved - {cid},
        rejected=s.rejected - {cid},
    )
    return replace(full, solver=s2)


def _step_restore(full: FullState, act: Action) -> FullState:
    var, values = act.get("variable"), act.get("values")
    generated = act.get("generated", ())
    s = full.solver
    _need(var in s.variables, "restore", f"{var} not declared")
    _need(values.disjoint(s.domain(var)), "restore", "restored values are still in the domain")
    _need(values.issubset(s.initial_domain(var)), "restore", "restored values exceed the initial domain")
    s2 = s.with_domain(var, s.domain(var).union(values)).push_events(generated)
    return replace(full, solver=s2)


def _step_reduce(full: FullState, act: Action, strict: bool) -> FullState:
    cid, var = act.get("constraint"), act.get("variable")
    removed, generated, cause = act.get("removed"), act.get("generated", ()), act.get("cause")
    s = full.solver
    pair_event = s.active_event(cid)
    _need(pair_event is not None and pair_event == cause, "reduce", f"({cid}, {cause}) is not an active pair")
    decl = s.declaration(cid)
    _need(decl is not None, "reduce", f"no declaration recorded for {cid}")
    _need(var in decl.variables, "reduce", f"{var} is not a variable of {cid}")
    _need(removed.issubset(s.domain(var)), "reduce", "removed values are not all in the domain")
    s2 = s.with_domain(var, s.domain(var).subtract(removed)).push_events(generated)
    if strict:
        s2 = replace(s2, active=tuple(p for p in s2.active if p[0] != cid))
    return replace(full, solver=s2)


def _retire(full: FullState, act: Action, rule: str) -> tuple[SolverState, str, SolverEvent]:
    cid = act.get("constraint")
    s = full.solver
    pair_event = s.active_event(cid)
    _need(pair_event is not None, rule, f"{cid} is not active")
    cause = act.get("cause")
    if cause is not None:
        _need(pair_event == cause, rule, f"({cid}, {cause}) is not the active pair")
    s2 = replace(s, active=tuple(p for p in s.active if p[0] != cid))
    return s2, cid, pair_event


def _step_suspend(full: FullState, act: Action) -> FullState:
    s2, cid, _ = _retire(full, act, "suspend")
    return replace(full, solver=replace(s2, sleeping=s2.sleeping | {cid}))


def _step_solved(full: FullState, act: Action) -> FullState:
    s2, cid, _ = _retire(full, act, "solved")
    decl = full.solver.declaration(cid)
    _need(decl is not None, "solved", f"no declaration recorded for {cid}")
    _need(decl.entailed(full.solver.domain_map()), "solved", f"{cid} is not entailed")
    return replace(full, solver=replace(s2, solved=s2.solved | {cid}))


def _step_reject(full: FullState, act: Action) -> FullState:
    s2, cid, _ = _retire(full, act, "reject")
    decl = full.solver.declaration(cid)
    _need(decl is not None, "reject", f"no declaration recorded for {cid}")
    _need(decl.falsified(full.solver.domain_map()), "reject", f"{cid} is not falsified")
    return replace(full, solver=replace(s2, rejected=s2.rejected | {cid}))


def _step_awake(full: FullState, act: Action) -> FullState:
    cid, cause = act.get("constraint"), act.get("cause")
    s = full.solver
    _need(cid in s.sleeping, "awake", f"{cid} is not sleeping")
    _need(cause == BOTTOM or cause == s.current_event, "awake",
          "waking event is neither bot nor the scheduled event")
    _need(awake_condition(s, cid, cause), "awake", f"{cid} does not watch {cause}")
    s2 = replace(s, active=s.active + ((cid, cause),), sleeping=s.sleeping - {cid})
    return replace(full, solver=s2)


def _step_schedule(full: FullState, act: Action) -> FullState:
    event, witness = act.get("event"), act.get("witness")
    s = full.solver
    _need(event in s.pending, "schedule", f"{event} is not pending")
    _need(schedulable(s, event), "schedule", "no sleeping constraint reacts to the event")
    if witness is not None:
        _need(awake_condition(s, witness, event), "schedule", f"{witness} does not react to the event")
    idx = s.pending.index(event)
    s2 = replace(s, pending=s.pending[:idx] + s.pending[idx + 1:], current_event=event)
    return replace(full, solver=s2)


def step(full: FullState, action: Action, *, strict_reduce: bool = False) -> FullState:
    """Apply one transition rule; raises TransitionError when conditions fail."""
    kind = action.kind
    if kind == "newVariable":
        return _step_new_variable(full, action)
    if kind == "newConstraint":
        return _step_new_constraint(full, action)
    if kind == "post":
        return _step_post(full, action)
    if kind == "newChild":
        return _step_new_child(full, action)
    if kind == "jumpTo":
        return _step_jump_to(full, action)
    if kind == "solution":
        return _step_solution(full, action)
    if kind == "failure":
        return _step_failure(full, action)
    if kind == "deactivate":
        return _step_deactivate(full, action)
    if kind == "restore":
        return _step_restore(full, action)
    if kind == "reduce":
        return _step_reduce(full, action, strict_reduce)
    if kind == "suspend":
        return _step_suspend(full, action)
    if kind == "solved":
        return _step_solved(full, action)
    if kind == "reject":
        return _step_reject(full, action)
    if kind == "awake":
        return _step_awake(full, action)
    if kind == "schedule":
        return _step_schedule(full, action)
    raise TransitionError(kind, "unknown rule")


# extraction: transition -> attribute record


def _pending_suffix(old: SolverState, new: SolverState) -> tuple[SolverEvent, ...]:
    return new.pending[len(old.pending):]


def extract_event(full: FullState, action: Action, new: FullState) -> GenericEvent:
    """Compute the attribute record of a transition from its state delta."""
    kind = action.kind
    depth = new.tree.depth(new.tree.current)
    if kind == "newVariable":
        var = action.get("variable")
        return GenericEvent(kind, depth, variable=var, domain=new.solver.domain(var))
    if kind == "newConstraint":
        cid = action.get("constraint")
        return GenericEvent(kind, depth, constraint=cid, decl=new.solver.declaration(cid))
    if kind in ("post", "deactivate", "suspend", "solved"):
        return GenericEvent(kind, depth, constraint=action.get("constraint"))
    if kind in ("newChild", "solution", "failure"):
        return GenericEvent(kind, depth, node=action.get("node"))
    if kind == "jumpTo":
        return GenericEvent(kind, depth, node=action.get("node"), node2=full.tree.current)
    if kind == "restore":
        var = action.get("variable")
        removed = new.solver.domain(var).subtract(full.solver.domain(var))
        return GenericEvent(kind, depth, variable=var, domain=removed,
                            generated=_pending_suffix(full.solver, new.solver) or None)
    if kind == "reduce":
        var = action.get("variable")
        delta = full.solver.domain(var).subtract(new.solver.domain(var))
        return GenericEvent(kind, depth, constraint=action.get("constraint"), variable=var,
                            domain=delta, generated=_pending_suffix(full.solver, new.solver),
                            cause=action.get("cause"))
    if kind in ("reject", "awake"):
        return GenericEvent(kind, depth, constraint=action.get("constraint"), cause=action.get("cause"))
    if kind == "schedule":
        return GenericEvent(kind, depth, event=action.get("event"), constraint=action.get("witness"))
    raise TransitionError(kind, "unknown rule")


# reconstruction: attribute record -> transition


def _fail(rule, text):
    raise ReconstructionError(rule, text)


def reconstruct_event(full: FullState, ev: GenericEvent, *, strict_reduce: bool = False) -> tuple[Action, FullState]:
    """Rebuild the transition one record encodes and apply it.

    Solver events are serialized without their originating constraint; the
    origin is recovered by matching against the replayed state (the active
    pair for causes, the pending queue for scheduled events), so replay
    yields structurally identical states to the original run.
    """
    s = full.solver
    kind = ev.type
    problem = shape_error(ev, strict=False)
    if problem:
        _fail(kind, problem)

    if kind == "newVariable":
        action = Action.of(kind, variable=ev.variable, domain=ev.domain)
    elif kind == "newConstraint":
        action = Action.of(kind, constraint=ev.constraint, decl=ev.decl)
    elif kind in ("post", "deactivate", "suspend", "solved"):
        action = Action.of(kind, constraint=ev.constraint)
    elif kind in ("newChild", "solution", "failure"):
        action = Action.of(kind, node=ev.node)
    elif kind == "jumpTo":
        if ev.node2 is not None and ev.node2 != full.tree.current:
            _fail(kind, f"origin node {ev.node2} is not the current node")
        action = Action.of(kind, node=ev.node)
    elif kind == "restore":
        gen = tuple(SolverEvent(e.kind, e.variable) for e in ev.generated or ())
        action = Action.of(kind, variable=ev.variable, values=ev.domain, generated=gen)
    elif kind == "reduce":
        pair_event = s.active_event(ev.constraint)
        if pair_event is None:
            _fail(kind, f"{ev.constraint} is not active")
        if ev.cause is not None and not pair_event.matches(ev.cause.kind, ev.cause.variable):
            _fail(kind, "recorded cause does not match the active pair")
        gen = tuple(SolverEvent(e.kind, e.variable, ev.constraint) for e in ev.generated or ())
        action = Action.of(kind, constraint=ev.constraint, variable=ev.variable,
                           removed=ev.domain, generated=gen, cause=pair_event)
    elif kind in ("reject", "awake"):
        if kind == "reject":
            cause = s.active_event(ev.constraint)
            if cause is None:
                _fail(kind, f"{ev.constraint} is not active")
            if ev.cause is not None and not cause.matches(ev.cause.kind, ev.cause.variable):
                _fail(kind, "recorded cause does not match the active pair")
        else:
            if ev.cause is None or ev.cause.kind == "bot":
                cause = BOTTOM
            elif s.current_event is not None and s.current_event.matches(ev.cause.kind, ev.cause.variable):
                cause = s.current_event
            else:
                _fail(kind, "recorded cause is not the scheduled event")
        action = Action.of(kind, constraint=ev.constraint, cause=cause)
    elif kind == "schedule":
        matches = [e for e in s.pending if e.matches(ev.event.kind, ev.event.variable)]
        if not matches:
            _fail(kind, f"no pending event matches {ev.event.kind} {ev.event.variable}")
        event = matches[0]
        if ev.constraint is not None:
            action = Action.of(kind, event=event, witness=ev.constraint)
        else:
            action = Action.of(kind, event=event)
    else:
        _fail(kind, "unknown event type")

    try:
        new = step(full, action, strict_reduce=strict_reduce)
    except TransitionError as exc:
        raise ReconstructionError(exc.rule, exc.condition) from exc
    return action, new


# semantics bundle and parameter tables

_SOLVER_PARAMS = ("variables", "constraints", "domains", "initial_domains", "active",
                  "solved", "rejected", "sleeping", "pending", "current_event")
_TREE_PARAMS = ("nodes", "snapshots", "depths", "current")
PARAMETERS = _SOLVER_PARAMS + _TREE_PARAMS

# Update-expression dependencies.  Snapshot traffic (whole solver states being
# copied into or out of the node map) is modelled as a dependency of
# ``snapshots`` on the solver parameters a profile actually lets vary; it is
# not charged to the copied parameters themselves.
PARAM_DEPS = {
    "variables": {"variables"},
    "constraints": {"constraints"},
    "domains": {"domains", "initial_domains"},
    "initial_domains": {"initial_domains"},
    "active": {"active", "constraints", "sleeping", "current_event"},
    "solved": {"solved", "active"},
    "rejected": {"rejected", "active"},
    "sleeping": {"sleeping", "active"},
    "pending": {"pending"},
    "current_event": {"current_event", "pending"},
    "nodes": {"nodes"},
    "snapshots": {"snapshots", "variables", "constraints", "domains", "initial_domains",
                  "active", "rejected", "sleeping", "pending", "current_event"},
    "depths": {"depths", "nodes"},
    "current": {"current", "nodes"},
}

_CHPT_READS = {"active", "pending", "rejected"}
_NODE_WRITES = {"nodes", "snapshots", "depths", "current"}

ACTION_READS = {
    "newVariable": {"variables"},
    "newConstraint": {"constraints", "variables"},
    "post": {"constraints", "active", "sleeping", "solved", "rejected"},
    "newChild": _CHPT_READS | {"nodes", "depths", "current"},
    "jumpTo": {"nodes", "snapshots", "current"},
    "solution": {"rejected", "active", "sleeping", "constraints", "domains", "nodes", "depths", "current"},
    "failure": {"rejected", "nodes", "depths", "current"},
    "deactivate": {"active", "sleeping", "solved", "rejected"},
    "restore": {"variables", "domains", "initial_domains", "pending"},
    "reduce": {"active", "constraints", "domains", "pending"},
    "suspend": {"active", "sleeping"},
    "solved": {"active", "constraints", "domains", "solved"},
    "reject": {"active", "constraints", "domains", "rejected"},
    "awake": {"sleeping", "active", "constraints", "current_event"},
    "schedule": {"pending", "sleeping", "constraints", "current_event"},
}

ACTION_WRITES = {
    "newVariable": {"variables", "domains", "initial_domains"},
    "newConstraint": {"constraints"},
    "post": {"active"},
    "newChild": set(_NODE_WRITES),
    "jumpTo": {"current"},
    "solution": set(_NODE_WRITES),
    "failure": set(_NODE_WRITES),
    "deactivate": {"active", "sleeping", "solved", "rejected"},
    "restore": {"domains", "pending"},
    "reduce": {"domains", "pending"},
    "suspend": {"active", "sleeping"},
    "solved": {"active", "solved"},
    "reject": {"active", "rejected"},
    "awake": {"active", "sleeping"},
    "schedule": {"pending", "current_event"},
}

# Writes a projection may discount: jumping rebinds the solver state to an
# existing snapshot and only navigates the tree; retiring rules merely remove
# entries (a removal can never move a pinned-empty parameter off its initial
# value, and emptying the active set stays expressible through the rules a
# profile keeps).
NEUTRAL_WRITES = {
    "jumpTo": set(_SOLVER_PARAMS) | {"current"},
    "solved": {"active"},
    "deactivate": {"active", "sleeping", "solved", "rejected"},
}


def get_parameter(full: FullState, name: str):
    if name in _SOLVER_PARAMS:
        return getattr(full.solver, name)
    return getattr(full.tree, name)


def reset_parameters(full: FullState, params: frozenset) -> FullState:
    """Pin the given parameters back to their initial (empty) values."""
    blank = SolverState()
    solver_updates = {p: getattr(blank, p) for p in params if p in _SOLVER_PARAMS}
    solver = replace(full.solver, **solver_updates) if solver_updates else full.solver
    tree = full.tree
    if "snapshots" in params or any(p in _SOLVER_PARAMS for p in params):
        snaps = tuple(
            (n, replace(s, **{p: getattr(blank, p) for p in params if p in _SOLVER_PARAMS}))
            for n, s in tree.snapshots
        )
        tree = replace(tree, snapshots=snaps)
    return FullState(solver=solver, tree=tree)


def is_initial(full: FullState) -> bool:
    return full == initial_state()


def make_semantics(*, strict_reduce: bool = False) -> ObservationalSemantics:
    """The full trace semantics, optionally with the strict reduce rule.

    Under the default rule a reduce leaves the active pair in place and
    suspend/solved/reject are the only deactivators; the strict variant also
    removes the pair at each reduce.
    """
    writes = {k: frozenset(v) for k, v in ACTION_WRITES.items()}
    if strict_reduce:
        writes["reduce"] = writes["reduce"] | {"active"}

    def apply(full, action):
        return step(full, action, strict_reduce=strict_reduce)

    def reconstruct_local(full, record):
        return reconstruct_event(full, record, strict_reduce=strict_reduce)

    return ObservationalSemantics(
        name="gentra4cp" + ("-strict" if strict_reduce else ""),
        action_kinds=frozenset(EVENT_TYPES),
        apply=apply,
        extract_local=extract_event,
        reconstruct_local=reconstruct_local,
        is_initial=is_initial,
        is_state=lambda s: isinstance(s, FullState),
        is_record=lambda r: isinstance(r, GenericEvent),
        parameters=PARAMETERS,
        param_deps={k: frozenset(v) for k, v in PARAM_DEPS.items()},
        action_reads={k: frozenset(v) for k, v in ACTION_READS.items()},
        action_writes=writes,
        neutral_writes={k: frozenset(v) for k, v in NEUTRAL_WRITES.items()},
        param_get=get_parameter,
        reset_params=reset_parameters,
    )


# guard checks


@dataclass(frozen=True)
class GuardViolation:
    index: int
    guard: str
    detail: str


@dataclass(frozen=True)
class GuardReport:
    guards: tuple[str, ...]
    checked: int
    violations: tuple[GuardViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        out = [f"FAIL guard {v.guard} event={v.index} {v.detail}" for v in self.violations]
        out.append(f"{'PASS' if self.ok else 'FAIL'} guards={','.join(self.guards)} events={self.checked}")
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def check_guard_steps(initial: FullState, steps, guards=DEFAULT_GUARDS) -> GuardReport:
    """Evaluate the run-level guards on the state each event fires in.

    g1: a solution state has no rejected constraint.
    g2: an event fires in a failure state exactly when a rejection is present.
    g3: reduce fires only while nothing is rejected.
    g4/g5: awake/schedule fire only while nothing is rejected and nothing is
    active (the single-activation discipline profiles opt into).
    """
    guards = tuple(guards)
    steps = list(steps)
    violations = []
    pre = initial
    for i, (action, post) in enumerate(steps):
        s = pre.solver
        kind = action.kind
        if "g1" in guards and solution_state(s) and s.rejected:
            violations.append(GuardViolation(i, "g1", "solution state with rejected constraints"))
        if "g2" in guards and failure_state(s) != bool(s.rejected):
            violations.append(GuardViolation(i, "g2", "failure predicate disagrees with the rejected set"))
        if "g3" in guards and kind == "reduce" and s.rejected:
            violations.append(GuardViolation(i, "g3", "reduce while a constraint is rejected"))
        if "g4" in guards and kind == "awake" and (s.rejected or s.active):
            violations.append(GuardViolation(i, "g4", "awake requires no rejection and no active pair"))
        if "g5" in guards and kind == "schedule" and (s.rejected or s.active):
            violations.append(GuardViolation(i, "g5", "schedule requires no rejection and no active pair"))
        pre = post
    return GuardReport(guards=guards, checked=len(steps), violations=tuple(violations))


def check_guards(vtrace: Trace, guards=DEFAULT_GUARDS) -> GuardReport:
    """Guard-check a virtual trace (as produced by validation or a solver run)."""
    steps = [(ev.action, ev.state) for ev in vtrace.events]
    return check_guard_steps(vtrace.initial_state, steps, guards)


# trace validation


@dataclass(frozen=True)
class ValidationError:
    index: int
    rule: str
    condition: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    checked: int
    error: ValidationError | None = None
    virtual: Trace | None = None
    guard_report: GuardReport | None = None

    def lines(self) -> list[str]:
        out = []
        if self.error is not None:
            out.append(f"FAIL validate event={self.error.index} rule={self.error.rule} {self.error.condition}")
        out.append(f"{'PASS' if self.ok else 'FAIL'} validate events={self.checked}")
        if self.guard_report is not None:
            out.extend(self.guard_report.lines())
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def validate(events, *, os: ObservationalSemantics | None = None,
             guards=DEFAULT_GUARDS, check_depth: bool = True,
             initial: FullState | None = None) -> ValidationReport:
    """Replay an actual event sequence from the initial state.

    Reports the first event whose reconstruction fails (with the rule and
    violated condition); on success returns the reconstructed virtual trace
    and the guard-check log.
    """
    os = os or make_semantics()
    full = initial if initial is not None else initial_state()
    steps = []
    events = list(events)
    for i, ev in enumerate(events):
        if ev.type not in os.action_kinds:
            return ValidationReport(False, i, error=ValidationError(i, ev.type, "event type outside the profile"))
        try:
            action, new = os.reconstruct_local(full, ev)
        except ReconstructionError as exc:
            return ValidationReport(False, i, error=ValidationError(i, exc.rule, exc.condition))
        if check_depth:
            expected = new.tree.depth(new.tree.current)
            if ev.depth != expected:
                return ValidationReport(
                    False, i, error=ValidationError(i, ev.type, f"depth {ev.depth} != current node depth {expected}"))
        steps.append((action, new))
        full = new
    start = initial if initial is not None else initial_state()
    virtual = Trace(start, tuple(VirtualPayload(a, s) for a, s in steps))
    guard_report = check_guard_steps(start, steps, guards)
    return ValidationReport(guard_report.ok, len(events), virtual=virtual, guard_report=guard_report)
