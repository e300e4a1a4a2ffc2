"""Compile a validated real-time model into a network of stopwatch automata.

One automaton per activation pattern (periodic/sporadic root tasks), one per
dependency edge, and one scheduler automaton per processor.  Shared clocks:
`xactT` measures time since T's latest activation, `xexecT` accumulates T's
execution time and is frozen (stopwatch) while T is preempted or waiting.
Shared actions: `actT` activates an instance of T, `finT` completes it.

Scheduler automata move to an absorbing `DeadlineMissed` location when a
monitored task overruns its deadline (`xactT > TDeadline`).  They also treat a
second activation of a task whose previous instance is still incomplete as a
deadline miss: with deadlines bounded by periods, a re-activation can only
happen after a miss, and without these edges the network would freeze at the
activation instant instead of reporting anything.  The overload edge for the
*running* task is guarded by `xexecT < TBCET` so that an instance able to
complete right at the boundary instant completes first (the activation then
enters normally).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .model import (
    Const,
    FpsNonPreemptive,
    FpsPreemptive,
    Param,
    Periodic,
    Processor,
    Rms,
    Sporadic,
    Task,
    Tdma,
    TimeExpr,
    Triggered,
    ValidatedModel,
)
from .pta import Automaton, Edge, Guard, GuardAtom, Location, ParamDecl, PtaNetwork, TRUE


class TranslationError(Exception):
    pass


@dataclass(frozen=True)
class NamingScheme:
    """Deterministic derivation of every shared name from task/processor names."""

    def act(self, task: str) -> str:
        return f"act{task}"

    def fin(self, task: str) -> str:
        return f"fin{task}"

    def xact(self, task: str) -> str:
        return f"xact{task}"

    def xexec(self, task: str) -> str:
        return f"xexec{task}"

    def period(self, task: str) -> str:
        return f"{task}Period"

    def offset(self, task: str) -> str:
        return f"{task}Offset"

    def iat(self, task: str) -> str:
        return f"{task}IAT"

    def bcet(self, task: str) -> str:
        return f"{task}BCET"

    def wcet(self, task: str) -> str:
        return f"{task}WCET"

    def deadline(self, task: str) -> str:
        return f"{task}Deadline"

    def miss(self, processor: str) -> str:
        return f"DeadlineMiss_{processor}"

    def slot_clock(self, processor: str) -> str:
        return f"xslot_{processor}"


SCHEME = NamingScheme()


def _rhs(expr: TimeExpr):
    return expr.value if isinstance(expr, Const) else expr.name


def _atom(clock: str, op: str, expr: TimeExpr) -> GuardAtom:
    return GuardAtom(clock, op, _rhs(expr))


def periodic_activation_pta(task: Task, scheme: NamingScheme = SCHEME) -> Automaton:
    """Two locations: wait out the offset, then activate every period."""
    assert isinstance(task.activation, Periodic)
    act = task.activation
    xact = scheme.xact(task.name)
    a = scheme.act(task.name)
    l1 = Location("l1", invariant=Guard((_atom(xact, "<=", act.offset),)))
    l2 = Location("l2", invariant=Guard((_atom(xact, "<=", act.period),)))
    edges = (
        Edge("l1", Guard((_atom(xact, "=", act.offset),)), a, frozenset({xact}), "l2"),
        Edge("l2", Guard((_atom(xact, "=", act.period),)), a, frozenset({xact}), "l2"),
    )
    return Automaton(f"act_{task.name}", (l1, l2), "l1", edges, (a,))


def sporadic_activation_pta(task: Task, scheme: NamingScheme = SCHEME) -> Automaton:
    """Like the periodic pattern, but after the initial release the next
    activation merely requires the minimum inter-arrival time to have passed
    (no invariant forces it)."""
    assert isinstance(task.activation, Sporadic)
    act = task.activation
    xact = scheme.xact(task.name)
    a = scheme.act(task.name)
    l1 = Location("l1", invariant=Guard((_atom(xact, "<=", act.offset),)))
    l2 = Location("l2")
    edges = (
        Edge("l1", Guard((_atom(xact, "=", act.offset),)), a, frozenset({xact}), "l2"),
        Edge("l2", Guard((_atom(xact, ">=", act.min_iat),)), a, frozenset({xact}), "l2"),
    )
    return Automaton(f"act_{task.name}", (l1, l2), "l1", edges, (a,))


def dependency_pta(pred: Task, succ: Task, scheme: NamingScheme = SCHEME) -> Automaton:
    """Completion of `pred` immediately (urgent location) activates `succ`."""
    ap, fp, asucc = scheme.act(pred.name), scheme.fin(pred.name), scheme.act(succ.name)
    locs = (Location("l1"), Location("l2"), Location("l3", urgent=True))
    edges = (
        Edge("l1", TRUE, ap, frozenset(), "l2"),
        Edge("l2", TRUE, fp, frozenset(), "l3"),
        Edge("l3", TRUE, asucc, frozenset({scheme.xact(succ.name)}), "l1"),
    )
    return Automaton(f"dep_{pred.name}_{succ.name}", locs, "l1", edges, (ap, fp, asucc))


def _miss_edges(source: str, tasks, running: Optional[str], miss_action: str, scheme: NamingScheme):
    """Deadline-monitor and overload edges for the given set of active tasks."""
    edges = []
    for t in tasks:
        guard = TRUE
        if t.name == running:
            guard = Guard((_atom(scheme.xexec(t.name), "<", t.bcet),))
        edges.append(Edge(source, guard, scheme.act(t.name), frozenset(), "DeadlineMissed"))
    for t in tasks:
        if t.deadline is not None:
            g = Guard((_atom(scheme.xact(t.name), ">", t.deadline),))
            edges.append(Edge(source, g, miss_action, frozenset(), "DeadlineMissed"))
    return edges


def _fps_scheduler_parts(proc: Processor, tasks: list[Task], scheme: NamingScheme = SCHEME):
    """Preemptive fixed-priority scheduler over the full subset table.

    One location per subset S of assigned tasks; the highest-priority member
    runs, every other execution clock is stopped.
    """
    tasks = sorted(tasks, key=lambda t: -t.priority)
    n = len(tasks)
    all_exec = frozenset(scheme.xexec(t.name) for t in tasks)
    miss_action = scheme.miss(proc.name)

    def members(mask: int) -> list[Task]:
        return [t for i, t in enumerate(tasks) if mask >> i & 1]

    def loc_name(mask: int) -> str:
        if mask == 0:
            return "idle"
        ms = members(mask)
        return "exec" + ms[0].name + "".join("wait" + t.name for t in ms[1:])

    locations = []
    edges = []
    running_map: dict[str, Optional[str]] = {}
    member_map: dict[str, tuple[str, ...]] = {}
    for mask in range(1 << n):
        name = loc_name(mask)
        ms = members(mask)
        if mask == 0:
            locations.append(Location(name, stopped=all_exec))
            running_map[name] = None
        else:
            r = ms[0]
            inv = Guard((_atom(scheme.xexec(r.name), "<=", r.wcet),))
            locations.append(Location(name, invariant=inv, stopped=all_exec - {scheme.xexec(r.name)}))
            running_map[name] = r.name
        member_map[name] = tuple(t.name for t in ms)
        for i, t in enumerate(tasks):
            if not mask >> i & 1:
                edges.append(
                    Edge(name, TRUE, scheme.act(t.name), frozenset({scheme.xexec(t.name)}), loc_name(mask | 1 << i))
                )
        if mask:
            r = ms[0]
            fin_guard = Guard((_atom(scheme.xexec(r.name), ">=", r.bcet),))
            idx = tasks.index(r)
            edges.append(Edge(name, fin_guard, scheme.fin(r.name), frozenset(), loc_name(mask & ~(1 << idx))))
            edges.extend(_miss_edges(name, ms, r.name, miss_action, scheme))
    locations.append(Location("DeadlineMissed", stopped=all_exec))
    running_map["DeadlineMissed"] = None
    member_map["DeadlineMissed"] = ()

    declared = tuple(scheme.act(t.name) for t in tasks) + tuple(scheme.fin(t.name) for t in tasks) + (miss_action,)
    auto = Automaton(f"sched_{proc.name}", tuple(locations), "idle", tuple(edges), declared)
    return auto, running_map, member_map


def _fps_nonpreemptive_scheduler_parts(proc: Processor, tasks: list[Task], scheme: NamingScheme = SCHEME):
    """Non-preemptive fixed-priority scheduler.

    The running task keeps the processor until completion; activations are
    only remembered.  Dispatch happens in an urgent intermediate location so
    that a task activated exactly at a completion instant still competes.
    """
    tasks = sorted(tasks, key=lambda t: -t.priority)
    n = len(tasks)
    all_exec = frozenset(scheme.xexec(t.name) for t in tasks)
    miss_action = scheme.miss(proc.name)

    def members(mask: int) -> list[Task]:
        return [t for i, t in enumerate(tasks) if mask >> i & 1]

    def run_name(run_idx: int, wait_mask: int) -> str:
        r = tasks[run_idx]
        return "exec" + r.name + "".join("wait" + t.name for t in members(wait_mask))

    def dispatch_name(wait_mask: int) -> str:
        return "dispatch" + "".join(t.name for t in members(wait_mask))

    locations = [Location("idle", stopped=all_exec)]
    running_map: dict[str, Optional[str]] = {"idle": None}
    member_map: dict[str, tuple[str, ...]] = {"idle": ()}
    edges = []
    for i, t in enumerate(tasks):
        edges.append(Edge("idle", TRUE, scheme.act(t.name), frozenset({scheme.xexec(t.name)}), run_name(i, 0)))

    for run_idx, r in enumerate(tasks):
        for wait_mask in range(1 << n):
            if wait_mask >> run_idx & 1:
                continue
            name = run_name(run_idx, wait_mask)
            inv = Guard((_atom(scheme.xexec(r.name), "<=", r.wcet),))
            locations.append(Location(name, invariant=inv, stopped=all_exec - {scheme.xexec(r.name)}))
            running_map[name] = r.name
            active = [r] + members(wait_mask)
            member_map[name] = tuple(t.name for t in active)
            for i, t in enumerate(tasks):
                if i != run_idx and not wait_mask >> i & 1:
                    edges.append(Edge(name, TRUE, scheme.act(t.name), frozenset(), run_name(run_idx, wait_mask | 1 << i)))
            fin_guard = Guard((_atom(scheme.xexec(r.name), ">=", r.bcet),))
            target = "idle" if wait_mask == 0 else dispatch_name(wait_mask)
            edges.append(Edge(name, fin_guard, scheme.fin(r.name), frozenset(), target))
            edges.extend(_miss_edges(name, active, r.name, miss_action, scheme))

    for wait_mask in range(1, 1 << n):
        name = dispatch_name(wait_mask)
        locations.append(Location(name, urgent=True, stopped=all_exec))
        running_map[name] = None
        member_map[name] = tuple(t.name for t in members(wait_mask))
        head = min(i for i in range(n) if wait_mask >> i & 1)  # highest priority waiter
        edges.append(
            Edge(name, TRUE, None, frozenset({scheme.xexec(tasks[head].name)}), run_name(head, wait_mask & ~(1 << head)))
        )
        for i, t in enumerate(tasks):
            if not wait_mask >> i & 1:
                edges.append(Edge(name, TRUE, scheme.act(t.name), frozenset(), dispatch_name(wait_mask | 1 << i)))
        edges.extend(_miss_edges(name, members(wait_mask), None, miss_action, scheme))

    locations.append(Location("DeadlineMissed", stopped=all_exec))
    running_map["DeadlineMissed"] = None
    member_map["DeadlineMissed"] = ()
    declared = tuple(scheme.act(t.name) for t in tasks) + tuple(scheme.fin(t.name) for t in tasks) + (miss_action,)
    auto = Automaton(f"sched_{proc.name}", tuple(locations), "idle", tuple(edges), declared)
    return auto, running_map, member_map


def _tdma_scheduler_parts(proc: Processor, tasks: list[Task], scheme: NamingScheme = SCHEME):
    """Cyclic slot rotation: each slot belongs to one task, which executes
    there whenever it has a pending instance; otherwise the slot idles.  An
    instance unfinished at the slot boundary resumes (frozen clock) on the
    next round."""
    assert isinstance(proc.policy, Tdma)
    by_name = {t.name: t for t in tasks}
    slots = [(by_name[name], length) for name, length in proc.policy.slots]
    k = len(slots)
    names = [t.name for t, _ in slots]
    all_exec = frozenset(scheme.xexec(nm) for nm in names)
    xslot = scheme.slot_clock(proc.name)
    miss_action = scheme.miss(proc.name)

    def loc_name(slot: int, pending: int) -> str:
        base = f"slot{slot}_" + ("busy" if pending >> slot & 1 else "idle")
        others = [names[j] for j in range(k) if j != slot and pending >> j & 1]
        return base + ("_pend" + "".join(others) if others else "")

    locations = []
    edges = []
    running_map: dict[str, Optional[str]] = {}
    member_map: dict[str, tuple[str, ...]] = {}
    for slot in range(k):
        owner, length = slots[slot]
        for pending in range(1 << k):
            name = loc_name(slot, pending)
            active = [slots[j][0] for j in range(k) if pending >> j & 1]
            inv_atoms = [GuardAtom(xslot, "<=", _rhs(length))]
            stopped = all_exec
            if pending >> slot & 1:
                inv_atoms.append(_atom(scheme.xexec(owner.name), "<=", owner.wcet))
                stopped = all_exec - {scheme.xexec(owner.name)}
                running_map[name] = owner.name
            else:
                running_map[name] = None
            member_map[name] = tuple(t.name for t in active)
            locations.append(Location(name, invariant=Guard(tuple(inv_atoms)), stopped=stopped))
            # slot rotation
            edges.append(
                Edge(
                    name,
                    Guard((GuardAtom(xslot, "=", _rhs(length)),)),
                    None,
                    frozenset({xslot}),
                    loc_name((slot + 1) % k, pending),
                )
            )
            for j, nm in enumerate(names):
                if not pending >> j & 1:
                    edges.append(
                        Edge(name, TRUE, scheme.act(nm), frozenset({scheme.xexec(nm)}), loc_name(slot, pending | 1 << j))
                    )
            if pending >> slot & 1:
                fin_guard = Guard((_atom(scheme.xexec(owner.name), ">=", owner.bcet),))
                edges.append(Edge(name, fin_guard, scheme.fin(owner.name), frozenset(), loc_name(slot, pending & ~(1 << slot))))
            edges.extend(_miss_edges(name, active, running_map[name], miss_action, scheme))
    locations.append(Location("DeadlineMissed", stopped=all_exec | {xslot}))
    running_map["DeadlineMissed"] = None
    member_map["DeadlineMissed"] = ()
    declared = tuple(scheme.act(nm) for nm in names) + tuple(scheme.fin(nm) for nm in names) + (miss_action,)
    auto = Automaton(f"sched_{proc.name}", tuple(locations), loc_name(0, 0), tuple(edges), declared)
    return auto, running_map, member_map


def fps_scheduler_pta(proc: Processor, tasks: list[Task], scheme: NamingScheme = SCHEME) -> Automaton:
    return _fps_scheduler_parts(proc, tasks, scheme)[0]


def fps_nonpreemptive_scheduler_pta(proc: Processor, tasks: list[Task], scheme: NamingScheme = SCHEME) -> Automaton:
    return _fps_nonpreemptive_scheduler_parts(proc, tasks, scheme)[0]


def tdma_scheduler_pta(proc: Processor, tasks: list[Task], scheme: NamingScheme = SCHEME) -> Automaton:
    return _tdma_scheduler_parts(proc, tasks, scheme)[0]


def _collect_parameters(model) -> tuple[ParamDecl, ...]:
    order: list[ParamDecl] = []
    seen: dict[str, Optional[tuple]] = {}

    def visit(expr: Optional[TimeExpr]):
        if not isinstance(expr, Param):
            return
        if expr.name in seen:
            if seen[expr.name] != expr.interval:
                raise TranslationError(f"parameter {expr.name} declared with conflicting intervals")
            return
        seen[expr.name] = expr.interval
        order.append(ParamDecl(expr.name, expr.interval))

    for t in model.tasks:
        act = t.activation
        if isinstance(act, Periodic):
            visit(act.period)
            visit(act.offset)
        elif isinstance(act, Sporadic):
            visit(act.min_iat)
            visit(act.offset)
        visit(t.bcet)
        visit(t.wcet)
        visit(t.deadline)
    for p in model.processors:
        if isinstance(p.policy, Tdma):
            for _, length in p.policy.slots:
                visit(length)
    return tuple(order)


def translate(validated: ValidatedModel, scheme: NamingScheme = SCHEME) -> PtaNetwork:
    """Build the full network: activation + dependency + scheduler automata."""
    model = validated.model
    automata: list[Automaton] = []
    running_maps: dict[str, dict] = {}
    member_maps: dict[str, dict] = {}
    sched_proc: dict[str, str] = {}

    for t in model.tasks:
        if isinstance(t.activation, Periodic):
            automata.append(periodic_activation_pta(t, scheme))
        elif isinstance(t.activation, Sporadic):
            automata.append(sporadic_activation_pta(t, scheme))
    by_name = {t.name: t for t in model.tasks}
    for pred, succ in model.dependencies:
        automata.append(dependency_pta(by_name[pred], by_name[succ], scheme))
    for p in model.processors:
        tasks = list(model.tasks_on(p.name))
        if not tasks:
            continue
        if isinstance(p.policy, Rms):
            raise TranslationError(f"processor {p.name} still rate-monotonic; derive priorities first")
        if isinstance(p.policy, FpsPreemptive):
            auto, running, members = _fps_scheduler_parts(p, tasks, scheme)
        elif isinstance(p.policy, FpsNonPreemptive):
            auto, running, members = _fps_nonpreemptive_scheduler_parts(p, tasks, scheme)
        elif isinstance(p.policy, Tdma):
            auto, running, members = _tdma_scheduler_parts(p, tasks, scheme)
        else:
            raise TranslationError(f"unsupported policy on {p.name}")
        automata.append(auto)
        running_maps[auto.name] = running
        member_maps[auto.name] = members
        sched_proc[auto.name] = p.name

    clocks = []
    for t in model.tasks:
        clocks.append(scheme.xact(t.name))
        clocks.append(scheme.xexec(t.name))
    for p in model.processors:
        if isinstance(p.policy, Tdma) and model.tasks_on(p.name):
            clocks.append(scheme.slot_clock(p.name))

    actions = []
    for t in model.tasks:
        actions.append(scheme.act(t.name))
        actions.append(scheme.fin(t.name))
    for p in model.processors:
        if model.tasks_on(p.name):
            actions.append(scheme.miss(p.name))

    annotations = {
        "task_processor": {t.name: t.processor for t in model.tasks},
        "activation_action": {scheme.act(t.name): t.name for t in model.tasks},
        "completion_action": {scheme.fin(t.name): t.name for t in model.tasks},
        "deadline": {t.name: (_rhs(t.deadline) if t.deadline is not None else None) for t in model.tasks},
        "schedulers": {
            name: {"processor": sched_proc[name], "running": running_maps[name], "members": member_maps[name]}
            for name in running_maps
        },
        "failure_locations": tuple((name, "DeadlineMissed") for name in running_maps),
    }
    return PtaNetwork(
        automata=tuple(automata),
        clocks=tuple(clocks),
        parameters=_collect_parameters(model),
        actions=tuple(actions),
        annotations=annotations,
    )
