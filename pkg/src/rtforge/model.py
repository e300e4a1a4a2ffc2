"""Domain model for real-time systems: processors, tasks, activations, chains.

Timing values are exact rationals (`fractions.Fraction`), either constants or
named parameters with an optional closed interval bound.  Models are immutable
after construction; `validate` returns a `ValidatedModel` wrapper that the
translator requires.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Union


def as_rational(value) -> Fraction:
    """Coerce ints, "n/d" strings and decimal strings to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # Exact decimal reading, not the binary float value (9.4 -> 47/5).
        return Fraction(repr(value))
    raise TypeError(f"cannot interpret {value!r} as a rational")


@dataclass(frozen=True)
class Const:
    """A known non-negative rational amount of time."""

    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", as_rational(self.value))


@dataclass(frozen=True)
class Param:
    """An unknown timing constant, optionally bounded to a closed interval."""

    name: str
    interval: Optional[tuple[Fraction, Fraction]] = None

    def __post_init__(self):
        if self.interval is not None:
            lo, hi = self.interval
            object.__setattr__(self, "interval", (as_rational(lo), as_rational(hi)))


TimeExpr = Union[Const, Param]


def const(value) -> Const:
    return Const(as_rational(value))


@dataclass(frozen=True)
class Periodic:
    period: TimeExpr
    offset: TimeExpr = Const(Fraction(0))


@dataclass(frozen=True)
class Sporadic:
    """Activations separated by at least `min_iat`; the first one is released
    exactly at `offset` (see the activation-pattern translation)."""

    min_iat: TimeExpr
    offset: TimeExpr = Const(Fraction(0))


@dataclass(frozen=True)
class Triggered:
    """Activated by the completion of the predecessor task in its chain."""


Activation = Union[Periodic, Sporadic, Triggered]


@dataclass(frozen=True)
class FpsPreemptive:
    pass


@dataclass(frozen=True)
class FpsNonPreemptive:
    pass


@dataclass(frozen=True)
class Rms:
    pass


@dataclass(frozen=True)
class Tdma:
    # (task name, slot length), in rotation order
    slots: tuple[tuple[str, TimeExpr], ...]


Policy = Union[FpsPreemptive, FpsNonPreemptive, Rms, Tdma]


@dataclass(frozen=True)
class Task:
    name: str
    processor: str
    activation: Activation
    bcet: TimeExpr
    wcet: TimeExpr
    deadline: Optional[TimeExpr] = None
    priority: Optional[int] = None  # higher integer = more urgent


@dataclass(frozen=True)
class Processor:
    name: str
    policy: Policy


@dataclass(frozen=True)
class RtModel:
    processors: tuple[Processor, ...]
    tasks: tuple[Task, ...]
    dependencies: tuple[tuple[str, str], ...]  # (predecessor, successor)

    def task(self, name: str) -> Task:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    def processor(self, name: str) -> Processor:
        for p in self.processors:
            if p.name == name:
                return p
        raise KeyError(name)

    def tasks_on(self, processor: str) -> tuple[Task, ...]:
        return tuple(t for t in self.tasks if t.processor == processor)

    def successor_of(self, task: str) -> Optional[str]:
        for pred, succ in self.dependencies:
            if pred == task:
                return succ
        return None

    def predecessor_of(self, task: str) -> Optional[str]:
        for pred, succ in self.dependencies:
            if succ == task:
                return pred
        return None

    def chains(self) -> tuple[tuple[str, ...], ...]:
        """Task chains in declaration order, one per non-triggered root."""
        out = []
        for t in self.tasks:
            if not isinstance(t.activation, Triggered):
                chain = [t.name]
                while (nxt := self.successor_of(chain[-1])) is not None:
                    chain.append(nxt)
                out.append(tuple(chain))
        return tuple(out)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.code}({self.subject}): {self.message}"


class ModelError(Exception):
    """Raised with the full list of validation diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class ValidatedModel:
    """Proof token that `validate` accepted the wrapped model."""

    model: RtModel


def _check_time_expr(diags, subject, label, expr, positive=False):
    if isinstance(expr, Const):
        if expr.value < 0:
            diags.append(Diagnostic("NEGATIVE_TIME", subject, f"{label} is negative"))
        elif positive and expr.value == 0:
            diags.append(Diagnostic("NONPOSITIVE_PERIOD", subject, f"{label} must be > 0"))
    elif isinstance(expr, Param):
        if expr.interval is not None:
            lo, hi = expr.interval
            if not (0 <= lo <= hi):
                diags.append(
                    Diagnostic("BAD_INTERVAL", subject, f"{label} interval must satisfy 0 <= lo <= hi")
                )
    else:
        diags.append(Diagnostic("BAD_TIME_EXPR", subject, f"{label} is not a time expression"))


def validate(model: RtModel) -> ValidatedModel:
    """Check every structural assumption the translation relies on.

    All violations are reported at once via `ModelError`.
    """
    diags: list[Diagnostic] = []

    seen_procs = set()
    for p in model.processors:
        if p.name in seen_procs:
            diags.append(Diagnostic("DUPLICATE_PROCESSOR", p.name, "processor name reused"))
        seen_procs.add(p.name)

    seen_tasks = set()
    for t in model.tasks:
        if t.name in seen_tasks:
            diags.append(Diagnostic("DUPLICATE_TASK", t.name, "task name reused"))
        seen_tasks.add(t.name)

    task_names = {t.name for t in model.tasks}

    for t in model.tasks:
        if t.processor not in seen_procs:
            diags.append(Diagnostic("UNKNOWN_PROCESSOR", t.name, f"processor {t.processor!r} not declared"))
        _check_time_expr(diags, t.name, "bcet", t.bcet)
        _check_time_expr(diags, t.name, "wcet", t.wcet)
        if isinstance(t.bcet, Const) and isinstance(t.wcet, Const) and t.bcet.value > t.wcet.value:
            diags.append(Diagnostic("BCET_GT_WCET", t.name, "bcet exceeds wcet"))
        if t.deadline is not None:
            _check_time_expr(diags, t.name, "deadline", t.deadline)
        act = t.activation
        if isinstance(act, Periodic):
            _check_time_expr(diags, t.name, "period", act.period, positive=True)
            _check_time_expr(diags, t.name, "offset", act.offset)
            if (
                t.deadline is not None
                and isinstance(t.deadline, Const)
                and isinstance(act.period, Const)
                and t.deadline.value > act.period.value
            ):
                diags.append(Diagnostic("DEADLINE_GT_PERIOD", t.name, "deadline exceeds period"))
        elif isinstance(act, Sporadic):
            _check_time_expr(diags, t.name, "min_iat", act.min_iat)
            _check_time_expr(diags, t.name, "offset", act.offset)
            if (
                t.deadline is not None
                and isinstance(t.deadline, Const)
                and isinstance(act.min_iat, Const)
                and t.deadline.value > act.min_iat.value
            ):
                diags.append(Diagnostic("DEADLINE_GT_PERIOD", t.name, "deadline exceeds minimum inter-arrival time"))

    # Dependencies form disjoint chains: in/out degree <= 1, acyclic.
    out_deg: dict[str, int] = {}
    in_deg: dict[str, int] = {}
    for pred, succ in model.dependencies:
        for name in (pred, succ):
            if name not in task_names:
                diags.append(Diagnostic("UNKNOWN_TASK", name, "dependency references undeclared task"))
        out_deg[pred] = out_deg.get(pred, 0) + 1
        in_deg[succ] = in_deg.get(succ, 0) + 1
    for name, d in out_deg.items():
        if d > 1:
            diags.append(Diagnostic("OUT_DEGREE", name, "task activates more than one successor"))
    for name, d in in_deg.items():
        if d > 1:
            diags.append(Diagnostic("IN_DEGREE", name, "task activated by more than one predecessor"))

    succ_of = {pred: succ for pred, succ in model.dependencies}
    for start in list(succ_of):
        slow = fast = start
        while fast in succ_of and succ_of[fast] in succ_of:
            slow = succ_of[slow]
            fast = succ_of[succ_of[fast]]
            if slow == fast:
                diags.append(Diagnostic("DEPENDENCY_CYCLE", start, "dependency chain is cyclic"))
                break

    for t in model.tasks:
        preds = in_deg.get(t.name, 0)
        if isinstance(t.activation, Triggered) and preds != 1:
            diags.append(Diagnostic("TRIGGERED_NO_PREDECESSOR", t.name, "triggered task needs exactly one predecessor"))
        if not isinstance(t.activation, Triggered) and preds != 0:
            diags.append(Diagnostic("ROOT_WITH_PREDECESSOR", t.name, "periodic/sporadic task cannot have a predecessor"))

    for p in model.processors:
        assigned = [t for t in model.tasks if t.processor == p.name]
        if isinstance(p.policy, (FpsPreemptive, FpsNonPreemptive)):
            prios = {}
            for t in assigned:
                if t.priority is None:
                    diags.append(Diagnostic("PRIORITY_MISSING", t.name, f"fixed-priority processor {p.name} needs a priority"))
                elif t.priority in prios:
                    diags.append(
                        Diagnostic("PRIORITY_CONFLICT", p.name, f"tasks {prios[t.priority]} and {t.name} share priority {t.priority}")
                    )
                else:
                    prios[t.priority] = t.name
        elif isinstance(p.policy, Tdma):
            slot_tasks = [name for name, _ in p.policy.slots]
            for name, length in p.policy.slots:
                _check_time_expr(diags, p.name, f"slot for {name}", length, positive=True)
                if name not in {t.name for t in assigned}:
                    diags.append(Diagnostic("TDMA_SLOT_UNKNOWN", p.name, f"slot task {name!r} not assigned to {p.name}"))
            for t in assigned:
                n = slot_tasks.count(t.name)
                if n == 0:
                    diags.append(Diagnostic("TDMA_SLOT_MISSING", t.name, f"no slot on {p.name}"))
                elif n > 1:
                    diags.append(Diagnostic("TDMA_SLOT_DUPLICATE", t.name, f"multiple slots on {p.name}"))

    if diags:
        raise ModelError(diags)
    return ValidatedModel(model)


def derive_rms_priorities(model: RtModel) -> RtModel:
    """Replace every rate-monotonic processor by a preemptive fixed-priority
    one, priorities strictly decreasing in period.

    Equal periods are broken by ascending task name (earlier name wins the
    higher priority).
    """
    diags: list[Diagnostic] = []
    new_tasks = {t.name: t for t in model.tasks}
    new_procs = []
    for p in model.processors:
        if not isinstance(p.policy, Rms):
            new_procs.append(p)
            continue
        assigned = [t for t in model.tasks if t.processor == p.name]
        keyed = []
        for t in assigned:
            act = t.activation
            if not (isinstance(act, Periodic) and isinstance(act.period, Const)):
                diags.append(Diagnostic("RMS_NONPERIODIC", t.name, "rate-monotonic tasks need a constant period"))
            else:
                keyed.append((act.period.value, t.name))
        if diags:
            continue
        keyed.sort()
        for rank, (_, name) in enumerate(keyed):
            new_tasks[name] = replace(new_tasks[name], priority=len(keyed) - rank)
        new_procs.append(Processor(p.name, FpsPreemptive()))
    if diags:
        raise ModelError(diags)
    return RtModel(
        processors=tuple(new_procs),
        tasks=tuple(new_tasks[t.name] for t in model.tasks),
        dependencies=model.dependencies,
    )
