"""Networks of parametric stopwatch timed automata.

Shared-name semantics: a clock, parameter or action name appearing in several
automata denotes one shared object; location names are automaton-local.  An
action fires iff every automaton declaring it takes a matching edge at the
same instant; automata not declaring it are unaffected.  Guards are
conjunctions of `clock <op> (constant | parameter)` atoms; disjunctions are
represented as parallel edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Union

from .model import Diagnostic

ClockId = str
ParamId = str
ActionId = str
LocId = str

OPS = ("<", "<=", "=", ">=", ">")


@dataclass(frozen=True)
class GuardAtom:
    clock: ClockId
    op: str
    rhs: Union[Fraction, ParamId]  # non-negative constant or parameter name

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"bad comparison operator {self.op!r}")
        if isinstance(self.rhs, int):
            object.__setattr__(self, "rhs", Fraction(self.rhs))


@dataclass(frozen=True)
class Guard:
    atoms: tuple[GuardAtom, ...] = ()  # empty conjunction is `true`

    @property
    def is_true(self) -> bool:
        return not self.atoms


TRUE = Guard()


def atom(clock: str, op: str, rhs) -> GuardAtom:
    if not isinstance(rhs, str):
        rhs = Fraction(rhs)
    return GuardAtom(clock, op, rhs)


def guard(*atoms: GuardAtom) -> Guard:
    return Guard(tuple(atoms))


@dataclass(frozen=True)
class Location:
    name: LocId
    urgent: bool = False
    invariant: Guard = TRUE
    stopped: frozenset[ClockId] = frozenset()


@dataclass(frozen=True)
class Edge:
    source: LocId
    guard: Guard
    action: Optional[ActionId]  # None = silent
    resets: frozenset[ClockId]
    target: LocId


@dataclass(frozen=True)
class Automaton:
    name: str
    locations: tuple[Location, ...]
    initial: LocId
    edges: tuple[Edge, ...]
    declared_actions: tuple[ActionId, ...]

    def location(self, name: LocId) -> Location:
        for loc in self.locations:
            if loc.name == name:
                return loc
        raise KeyError(name)


@dataclass(frozen=True)
class ParamDecl:
    name: ParamId
    interval: Optional[tuple[Fraction, Fraction]] = None


@dataclass(frozen=True)
class PtaNetwork:
    automata: tuple[Automaton, ...]
    clocks: tuple[ClockId, ...]
    parameters: tuple[ParamDecl, ...]
    actions: tuple[ActionId, ...]
    # Non-semantic metadata attached by the translator (scheduler location
    # roles, failure locations, ...); ignored for structural equality.
    annotations: dict = field(default_factory=dict, compare=False, repr=False)

    def parameter(self, name: ParamId) -> ParamDecl:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)


class PtaError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def _referenced_clocks(auto: Automaton):
    for loc in auto.locations:
        for a in loc.invariant.atoms:
            yield loc.name, a.clock
        for c in loc.stopped:
            yield loc.name, c
    for e in auto.edges:
        for a in e.guard.atoms:
            yield e.source, a.clock
        for c in e.resets:
            yield e.source, c


def well_formed(net: PtaNetwork) -> list[Diagnostic]:
    """Collect every structural defect; an empty list means well-formed."""
    diags: list[Diagnostic] = []
    clocks = set(net.clocks)
    params = {p.name for p in net.parameters}
    actions = set(net.actions)

    for group, names in (("clock", net.clocks), ("action", net.actions)):
        seen = set()
        for n in names:
            if n in seen:
                diags.append(Diagnostic("DUPLICATE_ID", n, f"{group} declared twice"))
            seen.add(n)
    seen = set()
    for p in net.parameters:
        if p.name in seen:
            diags.append(Diagnostic("DUPLICATE_ID", p.name, "parameter declared twice"))
        seen.add(p.name)

    declared_by: dict[str, int] = {a: 0 for a in actions}
    seen_autos = set()
    for auto in net.automata:
        if auto.name in seen_autos:
            diags.append(Diagnostic("DUPLICATE_AUTOMATON", auto.name, "automaton name reused"))
        seen_autos.add(auto.name)
        loc_names = set()
        for loc in auto.locations:
            if loc.name in loc_names:
                diags.append(Diagnostic("DUPLICATE_LOCATION", f"{auto.name}.{loc.name}", "location name reused"))
            loc_names.add(loc.name)
            if loc.urgent and not loc.invariant.is_true:
                diags.append(Diagnostic("URGENT_INVARIANT", f"{auto.name}.{loc.name}", "urgent location with nontrivial invariant"))
        if auto.initial not in loc_names:
            diags.append(Diagnostic("BAD_INITIAL", auto.name, f"initial location {auto.initial!r} undefined"))
        for a in auto.declared_actions:
            if a not in actions:
                diags.append(Diagnostic("UNDECLARED_ACTION", f"{auto.name}.{a}", "action not in network action set"))
            else:
                declared_by[a] += 1
        for e in auto.edges:
            if e.source not in loc_names or e.target not in loc_names:
                diags.append(Diagnostic("DANGLING_EDGE", auto.name, f"edge {e.source}->{e.target} leaves the automaton"))
            if e.action is not None and e.action not in auto.declared_actions:
                diags.append(Diagnostic("UNDECLARED_ACTION", f"{auto.name}.{e.action}", "edge action not declared by automaton"))
            for a in e.guard.atoms:
                if isinstance(a.rhs, Fraction) and a.rhs < 0:
                    diags.append(Diagnostic("NEGATIVE_CONSTANT", auto.name, f"guard compares {a.clock} to {a.rhs}"))
                if isinstance(a.rhs, str) and a.rhs not in params:
                    diags.append(Diagnostic("UNDECLARED_PARAMETER", f"{auto.name}.{a.rhs}", "guard references undeclared parameter"))
        for loc in auto.locations:
            for a in loc.invariant.atoms:
                if isinstance(a.rhs, str) and a.rhs not in params:
                    diags.append(Diagnostic("UNDECLARED_PARAMETER", f"{auto.name}.{a.rhs}", "invariant references undeclared parameter"))
        for where, c in _referenced_clocks(auto):
            if c not in clocks:
                diags.append(Diagnostic("UNDECLARED_CLOCK", f"{auto.name}.{where}", f"clock {c!r} not declared"))

    for a, n in declared_by.items():
        if n == 0:
            diags.append(Diagnostic("ORPHAN_ACTION", a, "action declared by no automaton"))
    return diags


def substitute(net: PtaNetwork, valuation: dict[ParamId, Fraction]) -> PtaNetwork:
    """Replace every parameter occurrence by its value; the result has an
    empty parameter set."""
    for p in net.parameters:
        if p.name not in valuation:
            raise PtaError("MISSING_VALUATION", f"no value for parameter {p.name}")
        v = Fraction(valuation[p.name])
        if v < 0:
            raise PtaError("OUT_OF_INTERVAL", f"{p.name} = {v} is negative")
        if p.interval is not None and not (p.interval[0] <= v <= p.interval[1]):
            raise PtaError(
                "OUT_OF_INTERVAL",
                f"{p.name} = {v} outside declared interval [{p.interval[0]}, {p.interval[1]}]",
            )

    def sub_guard(g: Guard) -> Guard:
        if g.is_true:
            return g
        return Guard(
            tuple(
                GuardAtom(a.clock, a.op, Fraction(valuation[a.rhs]) if isinstance(a.rhs, str) else a.rhs)
                for a in g.atoms
            )
        )

    automata = tuple(
        replace(
            auto,
            locations=tuple(replace(loc, invariant=sub_guard(loc.invariant)) for loc in auto.locations),
            edges=tuple(replace(e, guard=sub_guard(e.guard)) for e in auto.edges),
        )
        for auto in net.automata
    )
    return PtaNetwork(
        automata=automata,
        clocks=net.clocks,
        parameters=(),
        actions=net.actions,
        annotations=net.annotations,
    )
