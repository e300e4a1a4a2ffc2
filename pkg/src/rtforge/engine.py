"""Executable concrete semantics for concrete-valued automata networks.

Two evaluation modes share one compiled network representation:

* `check_schedulability` explores the digitized semantics exhaustively: after
  rescaling all constants to integers, time advances in unit steps and every
  clock is saturated one past the largest constant it is compared against,
  which makes the reachable state space finite even for sporadic activations.
* `validate_trace` replays a scripted sequence of (time, action) events under
  the exact dense-time semantics with rational clock values; silent edges and
  urgency are resolved automatically between scripted events.

Both agree on which locations are reachable for the guard shapes produced by
the translator (closed bounds plus strict deadline tests); the digitization is
an under-approximation of dense time in general and a quantum flag refines it.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Optional

from .pta import PtaNetwork, substitute

LT, LE, EQ, GE, GT = range(5)
_OPCODE = {"<": LT, "<=": LE, "=": EQ, ">=": GE, ">": GT}


class EngineError(Exception):
    pass


class StateLimitExceeded(EngineError):
    """Exploration hit the configured cap; the verdict is inconclusive."""

    def __init__(self, states_explored: int):
        self.states_explored = states_explored
        super().__init__(f"state limit exceeded after {states_explored} states")


@dataclass(frozen=True)
class GanttSegment:
    task: str
    processor: str
    start: Fraction
    end: Fraction
    preempted: bool  # instance still incomplete when the segment ended


@dataclass(frozen=True)
class MissInfo:
    task: str
    processor: str
    window_start: Fraction  # instant the deadline expired
    time: Fraction  # instant the failure transition fired


@dataclass(frozen=True)
class TimedTrace:
    """A concrete run: synchronized events plus sampled location vectors."""

    events: tuple[tuple[Fraction, str], ...]
    locations: tuple[tuple[Fraction, tuple[str, ...]], ...]
    gantt: tuple[GanttSegment, ...] = ()
    miss: Optional[MissInfo] = None


@dataclass(frozen=True)
class Verdict:
    kind: str  # "schedulable" | "deadline_miss"
    states_explored: int
    trace: Optional[TimedTrace] = None

    @property
    def schedulable(self) -> bool:
        return self.kind == "schedulable"


@dataclass(frozen=True)
class ConcreteState:
    locs: tuple[int, ...]  # location index per automaton
    clocks: tuple  # per-clock value, saturated integers or exact rationals


@dataclass(frozen=True)
class ScaledNetwork:
    """Parameter-free network with every constant an integer.

    One engine step lasts `1 / (scale * quantum)` original time units.
    """

    network: PtaNetwork
    scale: int
    quantum: int = 1
    _compiled: object = field(default=None, compare=False, repr=False)

    @property
    def steps_per_unit(self) -> int:
        return self.scale * self.quantum

    def compiled(self) -> "_Compiled":
        if self._compiled is None:
            object.__setattr__(self, "_compiled", _Compiled(self.network, saturate=True))
        return self._compiled


def _guard_constants(net: PtaNetwork):
    for auto in net.automata:
        for loc in auto.locations:
            for a in loc.invariant.atoms:
                yield a.rhs
        for e in auto.edges:
            for a in e.guard.atoms:
                yield a.rhs


def scale(net: PtaNetwork, valuation: dict[str, Fraction], quantum: int = 1) -> ScaledNetwork:
    """Substitute the valuation, then rescale every constant to an integer by
    the least common multiple of the denominators (times the quantum)."""
    if quantum < 1:
        raise EngineError("quantum must be a positive integer")
    concrete = substitute(net, valuation)
    denoms = [c.denominator for c in _guard_constants(concrete) if isinstance(c, Fraction)]
    factor = lcm(*denoms) if denoms else 1

    mult = factor * quantum
    if mult != 1:
        from dataclasses import replace

        from .pta import Guard, GuardAtom

        def scale_guard(g):
            if g.is_true:
                return g
            return Guard(tuple(GuardAtom(a.clock, a.op, a.rhs * mult) for a in g.atoms))

        concrete = replace(
            concrete,
            automata=tuple(
                replace(
                    auto,
                    locations=tuple(replace(l, invariant=scale_guard(l.invariant)) for l in auto.locations),
                    edges=tuple(replace(e, guard=scale_guard(e.guard)) for e in auto.edges),
                )
                for auto in concrete.automata
            ),
        )
    # all constants are integral now; normalize Fractions to int
    from dataclasses import replace

    from .pta import Guard, GuardAtom

    def intify(g):
        if g.is_true:
            return g
        atoms = []
        for a in g.atoms:
            if a.rhs.denominator != 1:
                raise EngineError(f"constant {a.rhs} not integral after rescaling")
            atoms.append(GuardAtom(a.clock, a.op, Fraction(int(a.rhs))))
        return Guard(tuple(atoms))

    concrete = replace(
        concrete,
        automata=tuple(
            replace(
                auto,
                locations=tuple(replace(l, invariant=intify(l.invariant)) for l in auto.locations),
                edges=tuple(replace(e, guard=intify(e.guard)) for e in auto.edges),
            )
            for auto in concrete.automata
        ),
    )
    return ScaledNetwork(network=concrete, scale=factor, quantum=quantum)


class _Compiled:
    """Index-based view of a parameter-free network for fast exploration."""

    def __init__(self, net: PtaNetwork, saturate: bool):
        if net.parameters:
            raise EngineError("network still has parameters; substitute first")
        self.net = net
        self.clock_index = {c: i for i, c in enumerate(net.clocks)}
        self.nclocks = len(net.clocks)
        self.autos = net.automata
        self.loc_index = []
        self.loc_names = []
        self.locdata = []  # per automaton: list of (urgent, inv_atoms, stopped_idx_set)
        self.silent = []  # per automaton per loc: tuple of edges
        self.byact = []  # per automaton per loc: {action: tuple of edges}
        ceil = [0] * self.nclocks

        def compile_guard(g):
            out = []
            for a in g.atoms:
                ci = self.clock_index[a.clock]
                c = a.rhs if isinstance(a.rhs, Fraction) else None
                if c is None:
                    raise EngineError(f"guard references parameter {a.rhs}")
                value = int(c) if c.denominator == 1 else c
                if isinstance(value, int) and value > ceil[ci]:
                    ceil[ci] = value
                out.append((ci, _OPCODE[a.op], value))
            return tuple(out)

        for ai, auto in enumerate(net.automata):
            li = {loc.name: i for i, loc in enumerate(auto.locations)}
            self.loc_index.append(li)
            self.loc_names.append(tuple(loc.name for loc in auto.locations))
            data = []
            for loc in auto.locations:
                data.append(
                    (
                        loc.urgent,
                        compile_guard(loc.invariant),
                        frozenset(self.clock_index[c] for c in loc.stopped),
                    )
                )
            self.locdata.append(data)
            sil = [[] for _ in auto.locations]
            bya = [{} for _ in auto.locations]
            for e in auto.edges:
                edge = (
                    compile_guard(e.guard),
                    tuple(sorted(self.clock_index[c] for c in e.resets)),
                    li[e.target],
                )
                if e.action is None:
                    sil[li[e.source]].append(edge)
                else:
                    bya[li[e.source]].setdefault(e.action, []).append(edge)
            self.silent.append([tuple(x) for x in sil])
            self.byact.append([{k: tuple(v) for k, v in d.items()} for d in bya])

        self.participants = {}
        for a in net.actions:
            self.participants[a] = tuple(ai for ai, auto in enumerate(net.automata) if a in auto.declared_actions)
        self.ceilings = tuple(c if saturate else None for c in ceil)
        self.saturate = saturate

        failures = net.annotations.get("failure_locations")
        fail = set()
        if failures:
            for name, loc in failures:
                for ai, auto in enumerate(net.automata):
                    if auto.name == name:
                        fail.add((ai, self.loc_index[ai][loc]))
        else:
            for ai, auto in enumerate(net.automata):
                for li_, loc in enumerate(auto.locations):
                    if loc.name == "DeadlineMissed":
                        fail.add((ai, li_))
        self.failure = frozenset(fail)
        self._ctx = {}

    def initial(self):
        locs = tuple(self.loc_index[ai][auto.initial] for ai, auto in enumerate(self.autos))
        clocks = (0,) * self.nclocks
        if not _holds_all(self.context(locs)["inv"], clocks):
            raise EngineError("initial state violates an invariant")
        return locs, clocks

    def context(self, locs):
        ctx = self._ctx.get(locs)
        if ctx is None:
            urgent = False
            inv = []
            stopped = set()
            for ai, li_ in enumerate(locs):
                u, ia, st = self.locdata[ai][li_]
                urgent = urgent or u
                inv.extend(ia)
                stopped |= st
            advance = tuple(
                (i, (self.ceilings[i] + 1) if self.ceilings[i] is not None else None)
                for i in range(self.nclocks)
                if i not in stopped
            )
            actions = {}
            for a, parts in self.participants.items():
                cand = []
                ok = True
                for ai in parts:
                    edges = self.byact[ai][locs[ai]].get(a)
                    if not edges:
                        ok = False
                        break
                    cand.append((ai, edges))
                if ok:
                    actions[a] = tuple(cand)
            sil = tuple((ai, e) for ai in range(len(self.autos)) for e in self.silent[ai][locs[ai]])
            ctx = {"urgent": urgent, "inv": tuple(inv), "advance": advance, "actions": actions, "silent": sil}
            self._ctx[locs] = ctx
        return ctx

    def is_failure(self, locs) -> bool:
        return any((ai, li_) in self.failure for ai, li_ in enumerate(locs))

    def loc_vector_names(self, locs) -> tuple[str, ...]:
        return tuple(self.loc_names[ai][li_] for ai, li_ in enumerate(locs))


def _holds(v, op, c) -> bool:
    if op == LT:
        return v < c
    if op == LE:
        return v <= c
    if op == EQ:
        return v == c
    if op == GE:
        return v >= c
    return v > c


def _holds_all(atoms, clocks) -> bool:
    for ci, op, c in atoms:
        if not _holds(clocks[ci], op, c):
            return False
    return True


def _discrete_successors(comp: _Compiled, locs, clocks):
    """All maximal synchronization vectors plus lone silent moves."""
    ctx = comp.context(locs)
    out = []
    for action, cand in ctx["actions"].items():
        choices = []
        feasible = True
        for ai, edges in cand:
            enabled = [e for e in edges if _holds_all(e[0], clocks)]
            if not enabled:
                feasible = False
                break
            choices.append((ai, enabled))
        if not feasible:
            continue
        for combo in itertools.product(*(en for _, en in choices)):
            new_locs = list(locs)
            resets = set()
            for (ai, _), (g, rs, tgt) in zip(choices, combo):
                new_locs[ai] = tgt
                resets.update(rs)
            nl = tuple(new_locs)
            nc = tuple(0 if i in resets else v for i, v in enumerate(clocks))
            if _holds_all(comp.context(nl)["inv"], nc):
                out.append((("sync", action), nl, nc))
    for ai, (g, rs, tgt) in ctx["silent"]:
        if _holds_all(g, clocks):
            nl = tuple(tgt if i == ai else l for i, l in enumerate(locs))
            nc = tuple(0 if i in rs else v for i, v in enumerate(clocks)) if rs else clocks
            if _holds_all(comp.context(nl)["inv"], nc):
                out.append((("silent", comp.autos[ai].name), nl, nc))
    return out


def _delay_successor(comp: _Compiled, locs, clocks):
    ctx = comp.context(locs)
    if ctx["urgent"]:
        return None
    nc = list(clocks)
    for i, cap in ctx["advance"]:
        v = clocks[i] + 1
        if cap is not None and v > cap:
            v = cap
        nc[i] = v
    nc = tuple(nc)
    if not _holds_all(ctx["inv"], nc):
        return None
    return nc


def successors(state: ConcreteState, scaled: ScaledNetwork) -> list[tuple[tuple, ConcreteState]]:
    """Discrete and one-quantum delay successors of a digitized state."""
    comp = scaled.compiled()
    out = [
        (label, ConcreteState(nl, nc))
        for label, nl, nc in _discrete_successors(comp, state.locs, state.clocks)
    ]
    nc = _delay_successor(comp, state.locs, state.clocks)
    if nc is not None:
        out.append((("delay",), ConcreteState(state.locs, nc)))
    return out


def initial_state(scaled: ScaledNetwork) -> ConcreteState:
    locs, clocks = scaled.compiled().initial()
    return ConcreteState(locs, clocks)


def _trace_from_parents(comp: _Compiled, scaled: ScaledNetwork, parent, last):
    spu = scaled.steps_per_unit
    path = []
    cur = last
    while parent[cur] is not None:
        prev, label = parent[cur]
        path.append((label, cur))
        cur = prev
    path.reverse()
    events = []
    samples = []
    steps = 0
    locs, clocks = cur
    samples.append((Fraction(0), comp.loc_vector_names(locs)))
    miss = None
    anns = comp.net.annotations
    prev_state = cur
    for label, state in path:
        if label[0] == "delay":
            steps += 1
        else:
            t = Fraction(steps, spu)
            if label[0] == "sync":
                events.append((t, label[1]))
            samples.append((t, comp.loc_vector_names(state[0])))
            if comp.is_failure(state[0]) and miss is None:
                miss = _miss_info(comp, anns, prev_state, state, label, t, spu)
        prev_state = state
    end = Fraction(steps, spu)
    if not samples or samples[-1][0] != end:
        samples.append((end, comp.loc_vector_names(path[-1][1][0] if path else locs)))
    return TimedTrace(events=tuple(events), locations=tuple(samples), miss=miss)


def _miss_info(comp, anns, prev_state, state, label, t, spu):
    """Identify which task missed on the transition into a failure location."""
    scheds = anns.get("schedulers", {})
    failed_auto = None
    for ai, li_ in enumerate(state[0]):
        if (ai, li_) in comp.failure and (ai, prev_state[0][ai]) not in comp.failure:
            failed_auto = ai
            break
    if failed_auto is None:
        return None
    auto_name = comp.autos[failed_auto].name
    proc = scheds.get(auto_name, {}).get("processor", auto_name)
    task = None
    if label[0] == "sync":
        task = anns.get("activation_action", {}).get(label[1])
    window_start = t
    deadlines = anns.get("deadline", {})
    prev_loc = comp.loc_names[failed_auto][prev_state[0][failed_auto]]
    members = scheds.get(auto_name, {}).get("members", {}).get(prev_loc, ())
    if task is None:
        # deadline-guard edge: find an over-deadline member
        for m in members:
            d = deadlines.get(m)
            if d is None or isinstance(d, str):
                continue
            ci = comp.clock_index.get(f"xact{m}")
            if ci is None:
                continue
            v = prev_state[1][ci]
            dscaled = d * spu
            cap = comp.ceilings[ci]
            if v > dscaled:
                task = m
                if cap is None or v <= cap:
                    window_start = t - Fraction(v - dscaled, spu)
                break
    else:
        d = deadlines.get(task)
        if d is not None and not isinstance(d, str):
            ci = comp.clock_index.get(f"xact{task}")
            if ci is not None:
                v = prev_state[1][ci]
                dscaled = d * spu
                cap = comp.ceilings[ci]
                if v > dscaled and (cap is None or v <= cap):
                    window_start = t - Fraction(v - dscaled, spu)
    if task is None and members:
        task = members[0]
    if task is None:
        return None
    return MissInfo(task=task, processor=proc, window_start=window_start, time=t)


def check_schedulability(
    net: PtaNetwork,
    valuation: dict[str, Fraction],
    quantum: int = 1,
    state_limit: Optional[int] = None,
) -> Verdict:
    """Exhaustive breadth-first reachability of the failure locations over the
    finite saturated state space; breadth-first order yields a shortest
    witness when a deadline miss exists."""
    scaled = scale(net, valuation, quantum)
    comp = scaled.compiled()
    init = comp.initial()
    if comp.is_failure(init[0]):
        parent = {init: None}
        return Verdict("deadline_miss", 1, _trace_from_parents(comp, scaled, parent, init))
    visited = {init}
    parent = {init: None}
    queue = deque([init])
    explored = 0
    while queue:
        locs, clocks = queue.popleft()
        explored += 1
        for label, nl, nc in _discrete_successors(comp, locs, clocks):
            nxt = (nl, nc)
            if nxt in visited:
                continue
            visited.add(nxt)
            parent[nxt] = ((locs, clocks), label)
            if comp.is_failure(nl):
                return Verdict("deadline_miss", explored, _trace_from_parents(comp, scaled, parent, nxt))
            queue.append(nxt)
        nc = _delay_successor(comp, locs, clocks)
        if nc is not None:
            nxt = (locs, nc)
            if nxt not in visited:
                visited.add(nxt)
                parent[nxt] = ((locs, clocks), ("delay",))
                queue.append(nxt)
        if state_limit is not None and len(visited) > state_limit:
            raise StateLimitExceeded(len(visited))
    return Verdict("schedulable", explored)


# --- exact-rational scripted replay ---------------------------------------


@dataclass(frozen=True)
class TraceRejection:
    index: int  # script step that failed
    reason: str

    def __str__(self):
        return f"step {self.index}: {self.reason}"


class TraceRejected(EngineError):
    def __init__(self, rejection: TraceRejection):
        self.rejection = rejection
        super().__init__(str(rejection))


def _exact_compiled(net: PtaNetwork, valuation):
    concrete = substitute(net, valuation)
    return _Compiled(concrete, saturate=False)


def _advance_exact(comp: _Compiled, branches, dt: Fraction, t_target: Fraction):
    """Advance every branch by exactly dt, firing silent edges at the instants
    where invariants would otherwise block; urgency forbids any positive
    delay.  Returns the surviving branches at the target time."""
    result = []
    work = [(locs, clocks, hist, dt) for (locs, clocks, hist) in branches]
    seen = set()
    while work:
        locs, clocks, hist, rem = work.pop()
        key = (locs, clocks, rem)
        if key in seen:
            continue
        seen.add(key)
        t_here = t_target - rem
        ctx = comp.context(locs)
        # silent edges may fire at this instant (also at the target time)
        for ai, (g, rs, tgt) in ctx["silent"]:
            if _holds_all(g, clocks):
                nl = tuple(tgt if i == ai else l for i, l in enumerate(locs))
                nc = tuple(Fraction(0) if i in rs else v for i, v in enumerate(clocks)) if rs else clocks
                if _holds_all(comp.context(nl)["inv"], nc):
                    work.append((nl, nc, hist + ((t_here, nl, nc),), rem))
        if rem == 0:
            result.append((locs, clocks, hist))
            continue
        if ctx["urgent"]:
            continue
        # largest delay before an upper-bound invariant closes
        step = rem
        running = {i for i, _ in ctx["advance"]}
        for ci, op, c in ctx["inv"]:
            if ci in running and op in (LT, LE, EQ):
                gap = c - clocks[ci]
                if gap < step:
                    step = gap
        if step <= 0:
            continue
        nc = tuple(v + step if i in running else v for i, v in enumerate(clocks))
        if not _holds_all(ctx["inv"], nc):
            continue
        work.append((locs, nc, hist, rem - step))
    return result


def replay(net: PtaNetwork, valuation, script) -> TimedTrace:
    """Exact replay of a (time, action) script.  Raises TraceRejected at the
    first infeasible step; otherwise returns the run of one accepted branch."""
    comp = _exact_compiled(net, valuation)
    anns = comp.net.annotations
    locs, clocks = comp.initial()
    clocks = tuple(Fraction(v) for v in clocks)
    branches = [(locs, clocks, ((Fraction(0), locs, clocks),))]
    now = Fraction(0)
    events = []
    for idx, (t, action) in enumerate(script):
        t = Fraction(t)
        if t < now:
            raise TraceRejected(TraceRejection(idx, f"timestamps decrease ({t} after {now})"))
        branches = _advance_exact(comp, branches, t - now, t)
        now = t
        if not branches:
            raise TraceRejected(TraceRejection(idx, f"no feasible evolution up to time {t}"))
        nxt = []
        for locs, clocks, hist in branches:
            ctx = comp.context(locs)
            cand = ctx["actions"].get(action)
            if cand is None:
                continue
            choices = []
            feasible = True
            for ai, edges in cand:
                enabled = [e for e in edges if _holds_all(e[0], clocks)]
                if not enabled:
                    feasible = False
                    break
                choices.append((ai, enabled))
            if not feasible:
                continue
            for combo in itertools.product(*(en for _, en in choices)):
                nl = list(locs)
                resets = set()
                for (ai, _), (g, rs, tgt) in zip(choices, combo):
                    nl[ai] = tgt
                    resets.update(rs)
                nl = tuple(nl)
                nc = tuple(Fraction(0) if i in resets else v for i, v in enumerate(clocks))
                if _holds_all(comp.context(nl)["inv"], nc):
                    nxt.append((nl, nc, hist + ((t, locs, clocks), (t, nl, nc))))
        if not nxt:
            raise TraceRejected(TraceRejection(idx, f"action {action} not enabled at time {t}"))
        events.append((t, action))
        # deduplicate identical states, keeping one history each
        uniq = {}
        for locs, clocks, hist in nxt:
            uniq.setdefault((locs, clocks), (locs, clocks, hist))
        branches = list(uniq.values())
    locs, clocks, hist = branches[0]
    failing = [b for b in branches if comp.is_failure(b[0])]
    if failing:
        locs, clocks, hist = failing[0]
    samples = tuple((tt, comp.loc_vector_names(ll)) for tt, ll, _ in hist)
    trace = TimedTrace(events=tuple(events), locations=samples)
    if failing:
        trace = _attach_replay_miss(comp, anns, trace, failing[0], events)
    return trace


def _attach_replay_miss(comp, anns, trace, branch, events):
    """Fill in the miss marker for a replay that reached a failure location."""
    locs, clocks, hist = branch
    t = hist[-1][0]
    scheds = anns.get("schedulers", {})
    deadlines = anns.get("deadline", {})
    failed = next(ai for ai, li_ in enumerate(locs) if (ai, li_) in comp.failure)
    auto_name = comp.autos[failed].name
    proc = scheds.get(auto_name, {}).get("processor", auto_name)
    prev_loc = None
    pre_clocks = clocks
    for tt, ll, cc in reversed(hist[:-1]):
        if not comp.is_failure(ll):
            prev_loc = comp.loc_names[failed][ll[failed]]
            pre_clocks = cc
            break
    members = scheds.get(auto_name, {}).get("members", {}).get(prev_loc, ())
    task = anns.get("activation_action", {}).get(events[-1][1]) if events else None
    if task not in members:
        task = None
    window_start = t
    best = None
    for m in members:
        d = deadlines.get(m)
        if d is None or isinstance(d, str):
            continue
        ci = comp.clock_index.get(f"xact{m}")
        if ci is None:
            continue
        v = pre_clocks[ci]
        if v >= d and (task is None or m == task):
            best = (m, t - (v - d))
            if m == task:
                break
    if best is not None:
        task, window_start = best
    if task is None and members:
        task = members[0]
    if task is None:
        return trace
    return TimedTrace(
        events=trace.events,
        locations=trace.locations,
        gantt=trace.gantt,
        miss=MissInfo(task=task, processor=proc, window_start=window_start, time=t),
    )


def validate_trace(net: PtaNetwork, valuation, script) -> tuple[bool, Optional[TraceRejection]]:
    """Spec-facing wrapper around `replay`."""
    try:
        replay(net, valuation, script)
        return True, None
    except TraceRejected as exc:
        return False, exc.rejection


def extract_gantt(trace: TimedTrace, net: PtaNetwork) -> tuple[GanttSegment, ...]:
    """Per-processor execution segments derived from scheduler location
    occupancy; a segment ends `preempted` when its task is still an active
    member of the scheduler afterwards."""
    scheds = net.annotations.get("schedulers", {})
    auto_index = {auto.name: i for i, auto in enumerate(net.automata)}
    segments = []
    for name, info in scheds.items():
        ai = auto_index.get(name)
        if ai is None:
            continue
        running = info.get("running", {})
        members = info.get("members", {})
        proc = info.get("processor", name)
        open_task = None
        open_start = None
        for t, locvec in trace.locations:
            loc = locvec[ai]
            task = running.get(loc)
            if task == open_task:
                continue
            if open_task is not None and t > open_start:
                still_active = open_task in members.get(loc, ())
                segments.append(GanttSegment(open_task, proc, open_start, t, bool(still_active)))
            open_task = task
            open_start = t
        if open_task is not None and trace.locations and trace.locations[-1][0] > open_start:
            segments.append(GanttSegment(open_task, proc, open_start, trace.locations[-1][0], False))
    segments.sort(key=lambda s: (s.processor, s.start, s.task))
    return tuple(segments)
