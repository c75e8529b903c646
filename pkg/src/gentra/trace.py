"""Trace objects, prefixes, segments, and prefix-closed trace domains.

A trace is an initial state followed by a finite ordered sequence of events.
Events are either *virtual* (an action label plus the state it reaches) or
*actual* (a synthetic attribute record emitted by a tracer); a single trace
never mixes the two kinds.  Sets of prefixes that are closed under taking
shorter prefixes form a lattice under union and intersection, with the empty
set at the bottom and the full prefix set at the top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator

from .errors import ClosureError, KindMismatchError, PrefixRangeError


@dataclass(frozen=True)
class VirtualPayload:
    """One observed transition: the action taken and the state it reached."""

    action: Hashable
    state: Hashable


@dataclass(frozen=True)
class ActualPayload:
    """One emitted record: the attributes a tracer wrote for a transition."""

    record: Hashable


TraceEvent = VirtualPayload | ActualPayload


def _kind_of(event: TraceEvent) -> str:
    return "virtual" if isinstance(event, VirtualPayload) else "actual"


@dataclass(frozen=True)
class Trace:
    """An initial state followed by a finite event sequence of one kind."""

    initial_state: Hashable
    events: tuple[TraceEvent, ...] = ()

    def __post_init__(self):
        kinds = {_kind_of(e) for e in self.events}
        if len(kinds) > 1:
            raise KindMismatchError("a trace cannot mix virtual and actual events")

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def kind(self) -> str | None:
        """'virtual' | 'actual', or None for the size-0 trace."""
        return _kind_of(self.events[0]) if self.events else None

    def prefix(self, k: int) -> "Trace":
        """The prefix made of the first ``k`` events (k=0 keeps just the state)."""
        if not 0 <= k <= self.size:
            raise PrefixRangeError(f"prefix size {k} out of range 0..{self.size}")
        return Trace(self.initial_state, self.events[:k])

    def prefixes(self) -> Iterator["Trace"]:
        for k in range(self.size + 1):
            yield self.prefix(k)

    def is_prefix_of(self, other: "Trace") -> bool:
        return (
            self.initial_state == other.initial_state
            and self.size <= other.size
            and other.events[: self.size] == self.events
        )


@dataclass(frozen=True)
class Segment:
    """A pure event sequence (no initial state); concatenation is associative."""

    events: tuple[TraceEvent, ...] = ()

    def __add__(self, other: "Segment") -> "Segment":
        return concat(self, other)

    @property
    def size(self) -> int:
        return len(self.events)


EMPTY_SEGMENT = Segment()


def concat(a: Segment, b: Segment) -> Segment:
    return Segment(a.events + b.events)


PrefixSet = frozenset


def all_prefixes(traces: Iterable[Trace]) -> PrefixSet:
    """Every prefix of every trace, deduplicated.

    The result is prefix-closed and contains the input traces.  All traces
    must agree on the event kind.
    """
    traces = list(traces)
    kinds = {t.kind for t in traces if t.kind is not None}
    if len(kinds) > 1:
        raise KindMismatchError("cannot mix virtual and actual traces in one prefix set")
    out = set()
    for t in traces:
        out.update(t.prefixes())
    return frozenset(out)


def is_prefix_closed(prefixes: Iterable[Trace]) -> bool:
    ps = set(prefixes)
    return all(t.prefix(t.size - 1) in ps for t in ps if t.size > 0)


def _require_closed(ps, label):
    if not is_prefix_closed(ps):
        raise ClosureError(f"{label} operand is not prefix-closed")


def domain_join(x: PrefixSet, y: PrefixSet) -> PrefixSet:
    """Lattice join of two prefix-closed sets: plain union."""
    _require_closed(x, "join")
    _require_closed(y, "join")
    return frozenset(x | y)


def domain_meet(x: PrefixSet, y: PrefixSet) -> PrefixSet:
    """Lattice meet of two prefix-closed sets: plain intersection."""
    _require_closed(x, "meet")
    _require_closed(y, "meet")
    return frozenset(x & y)


BOTTOM_DOMAIN: PrefixSet = frozenset()


def canonical_traces(prefixes: Iterable[Trace]) -> list[Trace]:
    """A deterministic ordering of a prefix set (by size, then by repr)."""
    return sorted(prefixes, key=lambda t: (t.size, repr(t)))


@dataclass(frozen=True)
class TraceDomain:
    """A finite family of prefix-closed sets, closed under union and intersection."""

    members: frozenset

    def __post_init__(self):
        for m in self.members:
            if not is_prefix_closed(m):
                raise ClosureError("trace-domain element is not prefix-closed")
        for a in self.members:
            for b in self.members:
                if frozenset(a | b) not in self.members or frozenset(a & b) not in self.members:
                    raise ClosureError("trace domain is not closed under union/intersection")

    @staticmethod
    def generated_by(elements: Iterable[PrefixSet]) -> "TraceDomain":
        """The smallest union/intersection-closed family containing ``elements``."""
        family = {frozenset(e) for e in elements}
        family.add(BOTTOM_DOMAIN)
        while True:
            fresh = set()
            for a in family:
                for b in family:
                    for c in (frozenset(a | b), frozenset(a & b)):
                        if c not in family:
                            fresh.add(c)
            if not fresh:
                return TraceDomain(frozenset(family))
            family |= fresh

    @property
    def bottom(self) -> PrefixSet:
        return BOTTOM_DOMAIN

    @property
    def top(self) -> PrefixSet:
        out: set = set()
        for m in self.members:
            out |= m
        return frozenset(out)
