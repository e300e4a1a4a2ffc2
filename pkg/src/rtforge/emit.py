"""Serialize an automata network to IMITATOR-style textual input.

The concrete grammar targets the 2.x dialect; the golden files under
``tests/golden`` are the normative definition of the output.  Rational
constants are rescaled to integers by the least common multiple of their
denominators, recorded in the header comment; emission is byte-deterministic.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

from .pta import Guard, PtaNetwork


class EmitError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def _collect_denominators(net: PtaNetwork):
    for auto in net.automata:
        for loc in auto.locations:
            for a in loc.invariant.atoms:
                if isinstance(a.rhs, Fraction):
                    yield a.rhs.denominator
        for e in auto.edges:
            for a in e.guard.atoms:
                if isinstance(a.rhs, Fraction):
                    yield a.rhs.denominator
    for p in net.parameters:
        if p.interval is not None:
            yield p.interval[0].denominator
            yield p.interval[1].denominator


def _fmt_rhs(rhs, factor: int) -> str:
    if isinstance(rhs, str):
        return rhs
    v = rhs * factor
    if v.denominator != 1:
        raise EmitError("UNSUPPORTED_CONSTRUCT", f"constant {rhs} not integral at scale {factor}")
    return str(int(v))


def _fmt_guard(g: Guard, factor: int) -> str:
    if g.is_true:
        return "True"
    return " & ".join(f"{a.clock} {a.op} {_fmt_rhs(a.rhs, factor)}" for a in g.atoms)


def emit_imitator(net: PtaNetwork, target_version: str = "2.10.4") -> str:
    if not target_version.startswith("2."):
        raise EmitError("UNSUPPORTED_CONSTRUCT", f"unknown target dialect {target_version!r}")

    denoms = list(_collect_denominators(net))
    factor = lcm(*denoms) if denoms else 1

    out = []
    out.append("(************************************************************")
    out.append(" * Stopwatch timed automata network")
    out.append(f" * target syntax: IMITATOR {target_version}")
    out.append(f" * time scale: {factor} model unit(s) per original time unit")
    out.append(" ************************************************************)")
    out.append("")
    if net.clocks or net.parameters:
        out.append("var")
        if net.clocks:
            out.append("    " + ", ".join(net.clocks))
            out.append("        : clock;")
        if net.parameters:
            out.append("    " + ", ".join(p.name for p in net.parameters))
            out.append("        : parameter;")
        out.append("")

    for auto in net.automata:
        out.append(f"(*** {auto.name} ***)")
        out.append(f"automaton {auto.name}")
        out.append("synclabs: " + ", ".join(auto.declared_actions) + ";")
        for loc in auto.locations:
            urgent = "urgent loc" if loc.urgent else "loc"
            line = f"{urgent} {loc.name}: invariant {_fmt_guard(loc.invariant, factor)}"
            if loc.stopped:
                line += " stop{" + ", ".join(sorted(loc.stopped)) + "}"
            out.append(line)
            for e in auto.edges:
                if e.source != loc.name:
                    continue
                parts = [f"    when {_fmt_guard(e.guard, factor)}"]
                if e.action is not None:
                    parts.append(f"sync {e.action}")
                if e.resets:
                    parts.append("do {" + ", ".join(f"{c} := 0" for c in sorted(e.resets)) + "}")
                parts.append(f"goto {e.target};")
                out.append(" ".join(parts))
        out.append(f"end (* {auto.name} *)")
        out.append("")

    out.append("init := True")
    for auto in net.automata:
        out.append(f"    & loc[{auto.name}] = {auto.initial}")
    for c in net.clocks:
        out.append(f"    & {c} = 0")
    for p in net.parameters:
        if p.interval is not None:
            lo = _fmt_rhs(p.interval[0], factor)
            hi = _fmt_rhs(p.interval[1], factor)
            out.append(f"    & {p.name} >= {lo} & {p.name} <= {hi}")
        else:
            out.append(f"    & {p.name} >= 0")
    out.append(";")

    failures = net.annotations.get("failure_locations") or tuple(
        (auto.name, loc.name)
        for auto in net.automata
        for loc in auto.locations
        if loc.name == "DeadlineMissed"
    )
    if failures:
        out.append("")
        clause = " or ".join(f"loc[{a}] = {l}" for a, l in failures)
        out.append(f"property := unreachable {clause};")
    out.append("")
    return "\n".join(out)
