"""Parameter-grid region synthesis and comparison against constraint sets.

A `Region` is the pointwise map of schedulability verdicts over a finite grid
of parameter valuations; it stands in for exact reachability synthesis at
integer (or finer) resolution.  Published result constraints are encoded as
`ConstraintSet` disjunctive normal forms over the parameters and compared
point by point.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from .engine import check_schedulability
from .model import Const, Param, Periodic, RtModel, Sporadic
from .pta import PtaNetwork

SCHEDULABLE = "schedulable"
DEADLINE_MISS = "deadline_miss"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class GridAxis:
    param: str
    lo: Fraction
    hi: Fraction
    step: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        object.__setattr__(self, "step", Fraction(self.step))
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        if self.lo > self.hi:
            raise ValueError("grid lower bound exceeds upper bound")

    def values(self) -> list[Fraction]:
        out = []
        v = self.lo
        while v <= self.hi:
            out.append(v)
            v += self.step
        return out


@dataclass(frozen=True)
class ParameterGrid:
    axes: tuple[GridAxis, ...]
    cap: int = 100_000

    def __post_init__(self):
        if self.size > self.cap:
            raise ValueError(f"grid has {self.size} points, cap is {self.cap}")

    @property
    def size(self) -> int:
        n = 1
        for ax in self.axes:
            n *= len(ax.values())
        return n

    def points(self):
        columns = [ax.values() for ax in self.axes]
        names = [ax.param for ax in self.axes]
        for combo in itertools.product(*columns):
            yield dict(zip(names, combo))


def grid(**axes) -> ParameterGrid:
    """grid(T1WCET=(4, 8), T4WCET=(1, 8, 1)) — step defaults to 1."""
    gx = []
    for name, spec in axes.items():
        if len(spec) == 2:
            lo, hi = spec
            step = 1
        else:
            lo, hi, step = spec
        gx.append(GridAxis(name, Fraction(lo), Fraction(hi), Fraction(step)))
    return ParameterGrid(tuple(gx))


@dataclass(frozen=True)
class LinearIneq:
    """sum(coef * param) <op> rhs with exact rational coefficients."""

    lhs: tuple[tuple[str, Fraction], ...]
    op: str
    rhs: Fraction

    def holds(self, valuation) -> bool:
        total = sum(coef * Fraction(valuation[p]) for p, coef in self.lhs)
        if self.op == "<":
            return total < self.rhs
        if self.op == "<=":
            return total <= self.rhs
        if self.op == "=":
            return total == self.rhs
        if self.op == ">=":
            return total >= self.rhs
        if self.op == ">":
            return total > self.rhs
        raise ValueError(f"bad operator {self.op!r}")


@dataclass(frozen=True)
class ConstraintSet:
    """Disjunction of conjunctions of linear inequalities."""

    disjuncts: tuple[tuple[LinearIneq, ...], ...]

    def parameters(self) -> set[str]:
        return {p for d in self.disjuncts for ineq in d for p, _ in ineq.lhs}


def ineq(lhs: dict, op: str, rhs) -> LinearIneq:
    return LinearIneq(tuple((p, Fraction(c)) for p, c in lhs.items()), op, Fraction(rhs))


def dnf(*disjuncts) -> ConstraintSet:
    return ConstraintSet(tuple(tuple(d) for d in disjuncts))


def evaluate_constraints(cs: ConstraintSet, valuation) -> bool:
    return any(all(q.holds(valuation) for q in d) for d in cs.disjuncts)


def constraints_to_json(cs: ConstraintSet) -> dict:
    return {
        "any": [
            {"all": [{"lhs": {p: str(c) for p, c in q.lhs}, "op": q.op, "rhs": str(q.rhs)} for q in d]}
            for d in cs.disjuncts
        ]
    }


def constraints_from_json(data: dict) -> ConstraintSet:
    return ConstraintSet(
        tuple(
            tuple(
                LinearIneq(
                    tuple((p, Fraction(c)) for p, c in q["lhs"].items()),
                    q["op"],
                    Fraction(q["rhs"]),
                )
                for q in d["all"]
            )
            for d in data["any"]
        )
    )


def structural_feasibility(model: RtModel) -> ConstraintSet:
    """The valuation-independent sanity constraints of a model: WCET >= BCET
    per task, and deadline <= period (or minimum inter-arrival time) for the
    monitored root tasks.  Points violating these are `infeasible`, never
    `schedulable`."""

    def terms(expr, sign):
        if isinstance(expr, Param):
            return {expr.name: Fraction(sign)}, Fraction(0)
        return {}, sign * expr.value

    conj = []
    for t in model.tasks:
        if isinstance(t.wcet, Param) or isinstance(t.bcet, Param):
            lhs_w, const_w = terms(t.wcet, 1)
            lhs_b, const_b = terms(t.bcet, -1)
            lhs = dict(lhs_w)
            for k, v in lhs_b.items():
                lhs[k] = lhs.get(k, Fraction(0)) + v
            conj.append(LinearIneq(tuple(lhs.items()), ">=", -(const_w + const_b)))
        bound = None
        if isinstance(t.activation, Periodic):
            bound = t.activation.period
        elif isinstance(t.activation, Sporadic):
            bound = t.activation.min_iat
        if t.deadline is not None and bound is not None and (isinstance(t.deadline, Param) or isinstance(bound, Param)):
            lhs_d, const_d = terms(t.deadline, 1)
            lhs_p, const_p = terms(bound, -1)
            lhs = dict(lhs_d)
            for k, v in lhs_p.items():
                lhs[k] = lhs.get(k, Fraction(0)) + v
            conj.append(LinearIneq(tuple(lhs.items()), "<=", -(const_d + const_p)))
    return ConstraintSet((tuple(conj),))


@dataclass(frozen=True)
class Region:
    grid: ParameterGrid
    fixed: tuple[tuple[str, Fraction], ...]
    points: tuple[tuple[tuple[Fraction, ...], str], ...]  # grid-order values -> verdict kind

    def verdicts(self):
        names = [ax.param for ax in self.grid.axes]
        for values, kind in self.points:
            yield dict(zip(names, values)), kind

    def verdict_at(self, valuation) -> str:
        key = tuple(Fraction(valuation[ax.param]) for ax in self.grid.axes)
        for values, kind in self.points:
            if values == key:
                return kind
        raise KeyError(valuation)


_WORKER_STATE: dict = {}


def _sweep_worker_init(net, fixed, quantum, state_limit):
    _WORKER_STATE["net"] = net
    _WORKER_STATE["fixed"] = fixed
    _WORKER_STATE["quantum"] = quantum
    _WORKER_STATE["state_limit"] = state_limit


def _sweep_worker(point):
    valuation = dict(_WORKER_STATE["fixed"])
    valuation.update(point)
    verdict = check_schedulability(
        _WORKER_STATE["net"],
        valuation,
        quantum=_WORKER_STATE["quantum"],
        state_limit=_WORKER_STATE["state_limit"],
    )
    return SCHEDULABLE if verdict.schedulable else DEADLINE_MISS


def sweep(
    net: PtaNetwork,
    grid: ParameterGrid,
    fixed: Optional[dict] = None,
    feasible: Union[ConstraintSet, Callable, None] = None,
    quantum: int = 1,
    state_limit: Optional[int] = None,
    jobs: int = 1,
) -> Region:
    """Check every grid point; results are merged in grid order regardless of
    the degree of parallelism."""
    fixed = {k: Fraction(v) for k, v in (fixed or {}).items()}
    covered = {ax.param for ax in grid.axes} | set(fixed)
    missing = [p.name for p in net.parameters if p.name not in covered]
    if missing:
        raise ValueError(f"parameters not covered by grid or fixed values: {missing}")

    if isinstance(feasible, ConstraintSet):
        cs = feasible
        feasible = lambda v: evaluate_constraints(cs, v)

    points = list(grid.points())
    flags = []
    for point in points:
        full = dict(fixed)
        full.update(point)
        flags.append(feasible is None or feasible(full))

    results: list[Optional[str]] = [INFEASIBLE] * len(points)
    todo = [(i, points[i]) for i in range(len(points)) if flags[i]]
    if jobs > 1 and len(todo) > 1:
        import multiprocessing as mp

        with mp.Pool(jobs, initializer=_sweep_worker_init, initargs=(net, fixed, quantum, state_limit)) as pool:
            for (i, _), kind in zip(todo, pool.map(_sweep_worker, [p for _, p in todo], chunksize=4)):
                results[i] = kind
    else:
        _sweep_worker_init(net, fixed, quantum, state_limit)
        for i, point in todo:
            results[i] = _sweep_worker(point)

    packed = tuple(
        (tuple(point[ax.param] for ax in grid.axes), results[i]) for i, point in enumerate(points)
    )
    return Region(grid=grid, fixed=tuple(sorted(fixed.items())), points=packed)


def compare_region(region: Region, cs: ConstraintSet) -> list[dict]:
    """Grid points whose sweep verdict disagrees with the constraint set;
    infeasible points are excluded from the comparison."""
    mismatches = []
    fixed = dict(region.fixed)
    for valuation, kind in region.verdicts():
        if kind == INFEASIBLE:
            continue
        full = dict(fixed)
        full.update(valuation)
        expected = evaluate_constraints(cs, full)
        got = kind == SCHEDULABLE
        if expected != got:
            mismatches.append({"valuation": valuation, "verdict": kind, "expected_schedulable": expected})
    return mismatches


def region_to_json(region: Region) -> str:
    doc = {
        "grid": [
            {"param": ax.param, "lo": str(ax.lo), "hi": str(ax.hi), "step": str(ax.step)}
            for ax in region.grid.axes
        ],
        "fixed": {k: str(v) for k, v in region.fixed},
        "points": [
            {"values": [str(v) for v in values], "verdict": kind} for values, kind in region.points
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def region_from_json(text: str) -> Region:
    doc = json.loads(text)
    axes = tuple(GridAxis(a["param"], Fraction(a["lo"]), Fraction(a["hi"]), Fraction(a["step"])) for a in doc["grid"])
    return Region(
        grid=ParameterGrid(axes),
        fixed=tuple(sorted((k, Fraction(v)) for k, v in doc["fixed"].items())),
        points=tuple((tuple(Fraction(v) for v in p["values"]), p["verdict"]) for p in doc["points"]),
    )


def region_to_csv(region: Region) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([ax.param for ax in region.grid.axes] + ["verdict"])
    for values, kind in region.points:
        writer.writerow([str(v) for v in values] + [kind])
    return buf.getvalue()
