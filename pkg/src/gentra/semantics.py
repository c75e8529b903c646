"""Observational semantics: labelled transitions with extraction and reconstruction.

A semantics bundles a state domain, a finite set of action kinds, a partial
transition function, and the two local translation functions between virtual
steps and actual records.  Extraction turns a virtual trace into the actual
trace a tracer would emit; reconstruction replays an actual trace back into
virtual steps.  A semantics is *faithful* when the two are mutually inverse
on every replayable trace; this module checks that property rather than
assuming it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .errors import ReconstructionError, TransitionError
from .trace import ActualPayload, Trace, VirtualPayload


@dataclass(frozen=True)
class Action:
    """A transition label: a rule kind plus its instantiated arguments."""

    kind: str
    args: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def of(cls, kind: str, **kwargs: Any) -> "Action":
        return cls(kind, tuple(sorted(kwargs.items())))

    def get(self, name: str, default: Any = None) -> Any:
        for k, v in self.args:
            if k == name:
                return v
        return default

    def replace(self, **kwargs: Any) -> "Action":
        merged = {k: v for k, v in self.args}
        merged.update(kwargs)
        return Action.of(self.kind, **merged)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.args)
        return f"Action({self.kind}{', ' if inner else ''}{inner})"


def _always(_: Any) -> bool:
    return True


@dataclass(frozen=True)
class ObservationalSemantics:
    """States, action kinds, transitions, and the trace translation pair.

    ``apply`` realizes the transition function and must raise
    :class:`TransitionError` outside its domain, which doubles as the
    membership test for the transition relation.  ``extract_local`` maps a
    transition to its attribute record; ``reconstruct_local`` maps a record
    back to the action and successor state.  The static parameter tables
    (``param_deps``, ``action_reads``, ``action_writes``) document which
    state parameters each rule's updates touch; the projection machinery
    consumes them.
    """

    name: str
    action_kinds: frozenset
    apply: Callable[[Any, Action], Any]
    extract_local: Callable[[Any, Action, Any], Any]
    reconstruct_local: Callable[[Any, Any], tuple[Action, Any]]
    is_initial: Callable[[Any], bool]
    is_state: Callable[[Any], bool] = _always
    is_record: Callable[[Any], bool] = _always
    parameters: tuple[str, ...] = ()
    param_deps: Mapping[str, frozenset] = field(default_factory=dict)
    action_reads: Mapping[str, frozenset] = field(default_factory=dict)
    action_writes: Mapping[str, frozenset] = field(default_factory=dict)
    # writes a projection may ignore: removal-only updates and wholesale
    # snapshot rebindings, which cannot move a pinned parameter off its
    # initial value or introduce information outside the kept parameters
    neutral_writes: Mapping[str, frozenset] = field(default_factory=dict)
    param_get: Callable[[Any, str], Any] | None = None
    reset_params: Callable[[Any, frozenset], Any] | None = None


def transition_holds(os: ObservationalSemantics, state: Any, action: Action, successor: Any) -> bool:
    """Membership test for the transition relation."""
    try:
        return os.apply(state, action) == successor
    except TransitionError:
        return False


def extract(os: ObservationalSemantics, vtrace: Trace) -> Trace:
    """Turn a virtual trace into the actual trace its tracer would emit.

    Every consecutive pair must be a real transition; the first offending
    index is reported otherwise.
    """
    if not os.is_initial(vtrace.initial_state):
        raise TransitionError(os.name, "initial state not in the initial-state set")
    state = vtrace.initial_state
    records = []
    for i, ev in enumerate(vtrace.events):
        if not isinstance(ev, VirtualPayload):
            raise TransitionError(os.name, "extract expects a virtual trace", index=i)
        if not transition_holds(os, state, ev.action, ev.state):
            raise TransitionError(os.name, f"step is not a {ev.action.kind} transition", index=i)
        records.append(ActualPayload(os.extract_local(state, ev.action, ev.state)))
        state = ev.state
    return Trace(vtrace.initial_state, tuple(records))


def reconstruct(os: ObservationalSemantics, atrace: Trace) -> Trace:
    """Replay an actual trace into the virtual trace it encodes."""
    if not os.is_initial(atrace.initial_state):
        raise ReconstructionError(os.name, "initial state not in the initial-state set")
    state = atrace.initial_state
    steps = []
    for i, ev in enumerate(atrace.events):
        if not isinstance(ev, ActualPayload):
            raise ReconstructionError(os.name, "reconstruct expects an actual trace", index=i)
        if not os.is_record(ev.record):
            raise ReconstructionError(os.name, "record outside the actual-state domain", index=i)
        try:
            action, successor = os.reconstruct_local(state, ev.record)
        except ReconstructionError as exc:
            raise ReconstructionError(exc.rule, exc.condition, index=i) from exc
        if not transition_holds(os, state, action, successor):
            raise ReconstructionError(os.name, "reconstructed step violates the transition relation", index=i)
        steps.append(VirtualPayload(action, successor))
        state = successor
    return Trace(atrace.initial_state, tuple(steps))


def first_divergence(a: Trace, b: Trace) -> int | None:
    """Index of the first differing position, or None when equal.

    Position -1 flags differing initial states; position ``min(size)`` flags
    a pure length mismatch.
    """
    if a.initial_state != b.initial_state:
        return -1
    for i, (x, y) in enumerate(zip(a.events, b.events)):
        if x != y:
            return i
    if a.size != b.size:
        return min(a.size, b.size)
    return None


@dataclass(frozen=True)
class FaithfulnessEntry:
    index: int
    ok: bool
    detail: str = ""
    divergence: int | None = None


@dataclass(frozen=True)
class FaithfulnessReport:
    entries: tuple[FaithfulnessEntry, ...]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def lines(self) -> list[str]:
        out = [f"{'PASS' if e.ok else 'FAIL'} faithfulness trace={e.index}"
               + (f" divergence={e.divergence}" if e.divergence is not None else "")
               + (f" {e.detail}" if e.detail else "")
               for e in self.entries]
        out.append(f"{'PASS' if self.ok else 'FAIL'} faithfulness traces={len(self.entries)}")
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def check_faithful(os: ObservationalSemantics, samples: Iterable[Trace]) -> FaithfulnessReport:
    """Verify reconstruct(extract(t)) == t on each sample virtual trace."""
    entries = []
    for i, t in enumerate(samples):
        try:
            back = reconstruct(os, extract(os, t))
        except (TransitionError, ReconstructionError) as exc:
            entries.append(FaithfulnessEntry(i, False, detail=str(exc), divergence=exc.index))
            continue
        pos = first_divergence(t, back)
        entries.append(FaithfulnessEntry(i, pos is None, divergence=pos))
    return FaithfulnessReport(tuple(entries))


def extraction_from_reconstruction(os: ObservationalSemantics,
                                   candidates: Callable[[Any], Iterable[Any]]):
    """Derive an extraction function by inverting ``reconstruct_local``.

    Searches the caller-supplied candidate records for the unique one that
    reconstructs to the given transition.  Only suitable for tests: the
    candidate space must be finite and must contain the right record.
    """

    def derived(state: Any, action: Action, successor: Any) -> Any:
        hits = []
        for record in candidates(state):
            try:
                got_action, got_state = os.reconstruct_local(state, record)
            except ReconstructionError:
                continue
            if got_action == action and got_state == successor:
                hits.append(record)
        if len(hits) != 1:
            raise TransitionError(os.name, f"reconstruction inversion found {len(hits)} candidates")
        return hits[0]

    return derived
