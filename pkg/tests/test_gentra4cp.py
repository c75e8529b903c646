"""Rule-level and replay-level tests of the trace format semantics."""

import pytest

from gentra.constraints import ConstraintDecl
from gentra.errors import ReconstructionError, StateInvariantError, TransitionError
from gentra.fdomain import FiniteDomain, full_domain, parse_domain
from gentra.gentra4cp import (
    GenericEvent,
    check_guards,
    extract_event,
    make_semantics,
    reconstruct_event,
    step,
    validate,
)
from gentra.semantics import Action, check_faithful
from gentra.solver import Problem, solve
from gentra.state import BOTTOM, SolverEvent, SolverState, initial_state, store
from gentra.trace import Trace, VirtualPayload

D05 = FiniteDomain.interval(0, 5)


def run_actions(actions, start=None, strict_reduce=False):
    full = start if start is not None else initial_state()
    for a in actions:
        full = step(full, a, strict_reduce=strict_reduce)
    return full


def element_problem():
    return Problem(
        variables=(("I", full_domain()), ("A", full_domain())),
        constraints=(("c1", ConstraintDecl.element("I", (2, 5, 7), "A")),),
        branches=((ConstraintDecl.eq("A", "I"), ConstraintDecl.eqc("A", 2)),),
        labels=("I", "A"),
    )


def base_state():
    """Two variables and two declared constraints, nothing posted."""
    return run_actions([
        Action.of("newVariable", variable="x", domain=D05),
        Action.of("newVariable", variable="y", domain=D05),
        Action.of("newConstraint", constraint="c1", decl=ConstraintDecl.eq("x", "y")),
        Action.of("newConstraint", constraint="c2", decl=ConstraintDecl.eqc("y", 3)),
    ])


# individual rules


def test_new_variable_adds_domain():
    full = run_actions([Action.of("newVariable", variable="v1", domain=full_domain())])
    assert full.solver.variables == ("v1",)
    assert full.solver.domain("v1") == full_domain()
    assert full.solver.initial_domain("v1") == full_domain()
    with pytest.raises(TransitionError):
        step(full, Action.of("newVariable", variable="v1", domain=D05))


def test_new_constraint_requires_declared_variables():
    full = run_actions([Action.of("newVariable", variable="x", domain=D05)])
    with pytest.raises(TransitionError):
        step(full, Action.of("newConstraint", constraint="c1", decl=ConstraintDecl.eq("x", "zz")))


def test_post_and_store_partition():
    full = base_state()
    full = step(full, Action.of("post", constraint="c1"))
    assert full.solver.active == (("c1", BOTTOM),)
    assert store(full.solver) == {"c1"}
    with pytest.raises(TransitionError):
        step(full, Action.of("post", constraint="c1"))  # already in the store
    with pytest.raises(TransitionError):
        step(full, Action.of("post", constraint="c9"))  # not declared


def test_store_examples():
    s = SolverState(
        variables=("x",),
        constraints=(("c1", None), ("c4", None)),
        domains=(("x", D05),),
        initial_domains=(("x", D05),),
        active=(("c1", BOTTOM),),
        sleeping=frozenset({"c4"}),
    )
    assert store(s) == {"c1", "c4"}
    assert store(SolverState()) == frozenset()
    broken = SolverState(constraints=(("c1", None),),
                         sleeping=frozenset({"c1"}), rejected=frozenset({"c1"}))
    with pytest.raises(StateInvariantError):
        store(broken)


def test_reduce_example_values():
    full = run_actions([
        Action.of("newVariable", variable="v1", domain=full_domain()),
        Action.of("newVariable", variable="v2", domain=full_domain()),
        Action.of("newConstraint", constraint="c1",
                  decl=ConstraintDecl.element("v1", (2, 5, 7), "v2")),
        Action.of("post", constraint="c1"),
    ])
    removed = parse_domain("[0,4-mx]")
    full2 = step(full, Action.of("reduce", constraint="c1", variable="v1",
                                 removed=removed, generated=(), cause=BOTTOM))
    assert full2.solver.domain("v1") == parse_domain("[1-3]")


def test_reduce_requires_active_pair_and_subset():
    full = base_state()
    with pytest.raises(TransitionError):
        step(full, Action.of("reduce", constraint="c1", variable="x",
                             removed=FiniteDomain.of([0]), generated=(), cause=BOTTOM))
    full = step(full, Action.of("post", constraint="c1"))
    with pytest.raises(TransitionError):
        step(full, Action.of("reduce", constraint="c1", variable="x",
                             removed=FiniteDomain.of([9]), generated=(), cause=BOTTOM))
    with pytest.raises(TransitionError):  # y not reduced by a (c1, bot) pair with wrong cause
        step(full, Action.of("reduce", constraint="c1", variable="x",
                             removed=FiniteDomain.of([0]), generated=(),
                             cause=SolverEvent("dom", "x")))


def test_reduce_strict_mode_deactivates():
    full = step(base_state(), Action.of("post", constraint="c1"))
    act = Action.of("reduce", constraint="c1", variable="x",
                    removed=FiniteDomain.of([0]), generated=(), cause=BOTTOM)
    default = step(full, act)
    assert default.solver.active == (("c1", BOTTOM),)
    strict = step(full, act, strict_reduce=True)
    assert strict.solver.active == ()


def test_suspend_solved_reject():
    full = step(base_state(), Action.of("post", constraint="c2"))
    suspended = step(full, Action.of("suspend", constraint="c2"))
    assert suspended.solver.sleeping == {"c2"}
    # entailment required for solved
    with pytest.raises(TransitionError):
        step(full, Action.of("solved", constraint="c2"))
    fixed = step(full, Action.of("reduce", constraint="c2", variable="y",
                                 removed=parse_domain("[0-2,4-5]"), generated=(), cause=BOTTOM))
    solved = step(fixed, Action.of("solved", constraint="c2"))
    assert solved.solver.solved == {"c2"}
    # falsity required for reject
    with pytest.raises(TransitionError):
        step(full, Action.of("reject", constraint="c2", cause=BOTTOM))
    emptied = step(full, Action.of("reduce", constraint="c2", variable="y",
                                   removed=D05, generated=(), cause=BOTTOM))
    rejected = step(emptied, Action.of("reject", constraint="c2", cause=BOTTOM))
    assert rejected.solver.rejected == {"c2"}


def test_restore_conditions_and_union():
    full = step(base_state(), Action.of("post", constraint="c1"))
    full = step(full, Action.of("reduce", constraint="c1", variable="x",
                                removed=FiniteDomain.of([0, 1]), generated=(), cause=BOTTOM))
    back = step(full, Action.of("restore", variable="x", values=FiniteDomain.of([0, 1])))
    assert back.solver.domain("x") == D05
    with pytest.raises(TransitionError):  # not disjoint from the current domain
        step(full, Action.of("restore", variable="x", values=FiniteDomain.of([1, 2])))
    with pytest.raises(TransitionError):  # outside the initial domain
        step(full, Action.of("restore", variable="x", values=FiniteDomain.of([9])))


def test_awake_and_schedule_rules():
    full = run_actions([
        Action.of("post", constraint="c1"),
        Action.of("suspend", constraint="c1"),
    ], start=base_state())
    ev = SolverEvent("dom", "x", "c9")
    full = step(full, Action.of("restore", variable="x", values=FiniteDomain(()), generated=(ev,)))
    assert ev in full.solver.pending
    with pytest.raises(TransitionError):  # not scheduled yet
        step(full, Action.of("awake", constraint="c1", cause=ev))
    sched = step(full, Action.of("schedule", event=ev, witness="c1"))
    assert sched.solver.current_event == ev and ev not in sched.solver.pending
    woken = step(sched, Action.of("awake", constraint="c1", cause=ev))
    assert woken.solver.active == (("c1", ev),) and "c1" not in woken.solver.sleeping
    # waking with bot is always allowed for a sleeping constraint
    assert step(sched, Action.of("awake", constraint="c1", cause=BOTTOM)).solver.active


def test_schedule_requires_watcher():
    full = base_state()
    ev = SolverEvent("dom", "x")
    full = step(full, Action.of("restore", variable="x", values=FiniteDomain(()), generated=(ev,)))
    with pytest.raises(TransitionError):
        step(full, Action.of("schedule", event=ev))  # nobody sleeps


def test_node_rules_and_jump():
    full = base_state()
    child = step(full, Action.of("newChild", node=1))
    assert child.tree.current == 1
    assert child.tree.depth(1) == 1
    assert child.tree.snapshot(1) == full.solver
    with pytest.raises(TransitionError):
        step(child, Action.of("newChild", node=1))  # node exists
    with pytest.raises(TransitionError):
        step(child, Action.of("jumpTo", node=1))  # already current
    # mutate the solver state, move to another node, then jump back
    moved = run_actions([
        Action.of("post", constraint="c1"),
        Action.of("reduce", constraint="c1", variable="x",
                  removed=FiniteDomain.of([0]), generated=(), cause=BOTTOM),
        Action.of("suspend", constraint="c1"),
        Action.of("newChild", node=2),
    ], start=child)
    assert moved.tree.current == 2
    back = step(moved, Action.of("jumpTo", node=1))
    assert back.solver == full.solver
    assert back.tree.current == 1
    with pytest.raises(TransitionError):
        step(moved, Action.of("jumpTo", node=7))


def test_solution_failure_predicates():
    full = base_state()
    with pytest.raises(TransitionError):
        step(full, Action.of("failure", node=5))  # nothing rejected
    posted = step(full, Action.of("post", constraint="c2"))
    with pytest.raises(TransitionError):
        step(posted, Action.of("solution", node=5))  # y not fixed


def test_deactivate_removes_from_any_part():
    full = run_actions([
        Action.of("post", constraint="c1"),
        Action.of("suspend", constraint="c1"),
    ], start=base_state())
    gone = step(full, Action.of("deactivate", constraint="c1"))
    assert store(gone.solver) == frozenset()
    with pytest.raises(TransitionError):
        step(gone, Action.of("deactivate", constraint="c1"))


# extraction and reconstruction


def test_extract_reduce_record_fields():
    full = step(base_state(), Action.of("post", constraint="c1"))
    gen = (SolverEvent("dom", "x", "c1"),)
    act = Action.of("reduce", constraint="c1", variable="x",
                    removed=FiniteDomain.of([0]), generated=gen, cause=BOTTOM)
    new = step(full, act)
    record = extract_event(full, act, new)
    assert record.type == "reduce"
    assert record.constraint == "c1" and record.variable == "x"
    assert record.generated == gen
    assert record.domain == FiniteDomain.of([0])
    assert record.cause == BOTTOM


def test_extract_node_and_identity_records():
    full = base_state()
    act = Action.of("newChild", node=1)
    new = step(full, act)
    record = extract_event(full, act, new)
    assert (record.type, record.node, record.depth) == ("newChild", 1, 1)
    posted = step(full, Action.of("post", constraint="c1"))
    act = Action.of("deactivate", constraint="c1")
    record = extract_event(posted, act, step(posted, act))
    assert (record.type, record.constraint) == ("deactivate", "c1")


def test_reconstruct_new_constraint_and_awake():
    full = run_actions([Action.of("newVariable", variable="x", domain=D05)])
    action, new = reconstruct_event(full, GenericEvent(
        "newConstraint", 0, constraint="c1", decl=ConstraintDecl.eqc("x", 3)))
    assert new.solver.is_declared("c1")
    full = run_actions([
        Action.of("post", constraint="c1"),
        Action.of("suspend", constraint="c1"),
    ], start=new)
    action, woken = reconstruct_event(full, GenericEvent("awake", 0, constraint="c1", cause=BOTTOM))
    assert woken.solver.active == (("c1", BOTTOM),)
    assert "c1" not in woken.solver.sleeping


def test_reconstruct_post_in_store_fails():
    full = step(base_state(), Action.of("post", constraint="c1"))
    with pytest.raises(ReconstructionError):
        reconstruct_event(full, GenericEvent("post", 0, constraint="c1"))


def test_reconstruct_strict_reduce_removes_pair():
    full = step(base_state(), Action.of("post", constraint="c1"))
    record = GenericEvent("reduce", 0, constraint="c1", variable="x",
                          generated=(), domain=FiniteDomain.of([0]), cause=BOTTOM)
    _, default = reconstruct_event(full, record)
    assert default.solver.active
    _, strict = reconstruct_event(full, record, strict_reduce=True)
    assert strict.solver.active == ()
    assert strict.solver.domain("x") == parse_domain("[1-5]")
    assert strict.solver.pending == ()


# run-level invariants on the worked example


@pytest.fixture(scope="module")
def element_run():
    return solve(element_problem())


def test_validate_empty_and_self_generated(element_run):
    assert validate([]).ok
    report = validate(element_run.events)
    assert report.ok and report.error is None
    assert report.guard_report.ok


def test_validate_flags_corrupted_reduce(element_run):
    events = list(element_run.events)
    # pick a reduce whose variable is already narrowed, so that claiming the
    # full universe as removed values breaks the subset condition right there
    prev = initial_state()
    idx = None
    for i, stepped in enumerate(element_run.virtual.events):
        if (stepped.action.kind == "reduce"
                and prev.solver.domain(stepped.action.get("variable")) != full_domain()):
            idx = i
            break
        prev = stepped.state
    assert idx is not None
    bad = parse_domain("[0-mx]")
    events[idx] = GenericEvent("reduce", events[idx].depth, constraint=events[idx].constraint,
                               variable=events[idx].variable, domain=bad,
                               generated=events[idx].generated, cause=events[idx].cause)
    report = validate(events)
    assert not report.ok
    assert report.error.index == idx
    assert report.error.rule == "reduce"


def test_depth_law(element_run):
    for record, stepped in zip(element_run.events, element_run.virtual.events):
        tree = stepped.state.tree
        assert record.depth == tree.depth(tree.current)
        if record.type == "newChild":
            parent_depth = tree.depth(tree.current) - 1
            assert parent_depth >= 0


def test_new_child_increments_depth(element_run):
    prev = initial_state()
    for stepped in element_run.virtual.events:
        if stepped.action.kind in ("newChild", "solution", "failure"):
            node = stepped.action.get("node")
            assert stepped.state.tree.depth(node) == prev.tree.depth(prev.tree.current) + 1
        prev = stepped.state


def test_partition_invariant_after_every_step(element_run):
    for stepped in element_run.virtual.events:
        store(stepped.state.solver)  # raises on violation


def test_monotone_reduction_between_jumps(element_run):
    prev = initial_state()
    for stepped in element_run.virtual.events:
        if stepped.action.kind not in ("restore", "jumpTo", "newVariable"):
            for var, dom in stepped.state.solver.domains:
                assert dom.issubset(prev.solver.domain(var))
        prev = stepped.state


def test_jump_restores_snapshot_exactly(element_run):
    prev = initial_state()
    seen = False
    for stepped in element_run.virtual.events:
        if stepped.action.kind == "jumpTo":
            node = stepped.action.get("node")
            assert stepped.state.solver == prev.tree.snapshot(node)
            # every domain equals its snapshot value after the jump
            for var, dom in stepped.state.solver.domains:
                assert dom == prev.tree.snapshot(node).domain(var)
            seen = True
        prev = stepped.state
    assert seen


def test_stepwise_extract_reconstruct_inverse(element_run):
    prev = initial_state()
    for stepped in element_run.virtual.events:
        record = extract_event(prev, stepped.action, stepped.state)
        action, again = reconstruct_event(prev, record)
        assert action == stepped.action
        assert again == stepped.state
        prev = stepped.state


def test_faithfulness_on_element_run(element_run):
    assert check_faithful(make_semantics(), [element_run.virtual]).ok


def test_dual_faithfulness_on_emitted_trace(element_run):
    from gentra.semantics import extract, reconstruct
    os = make_semantics()
    actual = extract(os, element_run.virtual)
    assert extract(os, reconstruct(os, actual)) == actual


def test_locality_of_extraction(element_run):
    os = make_semantics()
    j = 5
    prefix = Trace(initial_state(), element_run.virtual.events[:j + 1])
    # replace the step at j with a different but valid transition
    base = element_run.virtual.events[j - 1].state
    alt_action = Action.of("newVariable", variable="zz", domain=D05)
    alt_state = step(base, alt_action)
    mutated = Trace(initial_state(),
                    element_run.virtual.events[:j] + (VirtualPayload(alt_action, alt_state),))
    from gentra.semantics import extract
    a1 = extract(os, prefix)
    a2 = extract(os, mutated)
    assert a1.events[:j] == a2.events[:j]


# guards


def guard_scenario_events():
    """Two posted constraints; one rejected; the other keeps reducing."""
    return [
        GenericEvent("newVariable", 0, variable="x", domain=D05),
        GenericEvent("newVariable", 0, variable="y", domain=D05),
        GenericEvent("newConstraint", 0, constraint="c1", decl=ConstraintDecl.eqc("x", 7)),
        GenericEvent("newConstraint", 0, constraint="c2", decl=ConstraintDecl.eqc("y", 3)),
        GenericEvent("post", 0, constraint="c1"),
        GenericEvent("post", 0, constraint="c2"),
        GenericEvent("reject", 0, constraint="c1", cause=BOTTOM),
        GenericEvent("reduce", 0, constraint="c2", variable="y",
                     generated=(), domain=parse_domain("[0-2,4-5]"), cause=BOTTOM),
    ]


def test_guard_g3_flags_reduce_under_rejection():
    report = validate(guard_scenario_events())
    assert report.error is None  # replay itself is fine
    assert not report.ok
    violations = report.guard_report.violations
    assert any(v.guard == "g3" and v.index == 7 for v in violations)


def test_guard_g2_failure_needs_rejection(element_run):
    report = check_guards(element_run.virtual)
    assert report.ok
    # the run contains a failure event; its pre-state must be a failure state
    idx = [i for i, ev in enumerate(element_run.events) if ev.type == "failure"]
    assert idx, "expected a failure event in the element run"
    pre = element_run.virtual.events[idx[0] - 1].state
    assert pre.solver.rejected


def test_guards_g4_g5_palm_profile_only():
    events = guard_scenario_events()[:6]
    report = validate(events, guards=("g1", "g2", "g3", "g4", "g5"))
    assert report.ok  # no awake/schedule while anything is active here
    # a second post while c1 is active violates nothing generic, but an
    # awake-style discipline check would reject an awake with a busy store
