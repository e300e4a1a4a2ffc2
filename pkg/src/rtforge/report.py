"""Deterministic SVG rendering: 2-D schedulability cartography and Gantt
charts of concrete runs.  Colors are fixed: green = schedulable, red =
deadline miss, grey = structurally infeasible point."""

from __future__ import annotations

from fractions import Fraction
from typing import Optional
from xml.sax.saxutils import escape

from .engine import TimedTrace
from .pta import PtaNetwork
from .sweep import DEADLINE_MISS, INFEASIBLE, SCHEDULABLE, Region

COLORS = {
    SCHEDULABLE: "#6aa84f",
    DEADLINE_MISS: "#cc4125",
    INFEASIBLE: "#b7b7b7",
}


class ReportError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def _fmt(x) -> str:
    f = Fraction(x)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{float(f):g}"


def region_to_svg(region: Region, x: str, y: str) -> str:
    """One colored cell per grid point, x rightwards and y upwards."""
    names = {ax.param for ax in region.grid.axes}
    if names != {x, y} or len(region.grid.axes) != 2:
        raise ReportError("DIM_MISMATCH", f"grid axes {sorted(names)} do not match ({x}, {y})")
    ax_x = next(a for a in region.grid.axes if a.param == x)
    ax_y = next(a for a in region.grid.axes if a.param == y)
    xs = ax_x.values()
    ys = ax_y.values()
    cell = 28
    left, bottom, top, right = 64, 46, 16, 16
    width = left + cell * len(xs) + right
    height = top + cell * len(ys) + bottom

    def cx(v):
        return left + cell * xs.index(v)

    def cy(v):
        return top + cell * (len(ys) - 1 - ys.index(v))

    order = [ax.param for ax in region.grid.axes]
    xi, yi = order.index(x), order.index(y)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for values, kind in region.points:
        vx, vy = values[xi], values[yi]
        lines.append(
            f'  <rect x="{cx(vx)}" y="{cy(vy)}" width="{cell}" height="{cell}" '
            f'fill="{COLORS[kind]}" stroke="#ffffff" stroke-width="1">'
            f"<title>{escape(x)}={_fmt(vx)}, {escape(y)}={_fmt(vy)}: {kind}</title></rect>"
        )
    for v in xs:
        lines.append(
            f'  <text x="{cx(v) + cell // 2}" y="{top + cell * len(ys) + 16}" '
            f'font-size="10" text-anchor="middle" font-family="monospace">{_fmt(v)}</text>'
        )
    for v in ys:
        lines.append(
            f'  <text x="{left - 6}" y="{cy(v) + cell // 2 + 4}" '
            f'font-size="10" text-anchor="end" font-family="monospace">{_fmt(v)}</text>'
        )
    lines.append(
        f'  <text x="{left + cell * len(xs) // 2}" y="{height - 10}" font-size="12" '
        f'text-anchor="middle" font-family="monospace">{escape(x)} (time units)</text>'
    )
    lines.append(
        f'  <text x="14" y="{top + cell * len(ys) // 2}" font-size="12" text-anchor="middle" '
        f'font-family="monospace" transform="rotate(-90 14 {top + cell * len(ys) // 2})">{escape(y)} (time units)</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def gantt_to_svg(trace: TimedTrace, net: Optional[PtaNetwork] = None) -> str:
    """One lane per processor: labeled execution segments, activation arrows
    at the activation instants, and a red box over a deadline-miss window."""
    lane_h, px = 34, 32
    segments = trace.gantt
    processors = sorted({s.processor for s in segments})
    if not processors and net is not None:
        processors = sorted(set(net.annotations.get("task_processor", {}).values()))
    t_end = Fraction(0)
    for s in segments:
        t_end = max(t_end, s.end)
    for t, _ in trace.events:
        t_end = max(t_end, t)
    if trace.miss:
        t_end = max(t_end, trace.miss.time)
    left, top = 62, 12
    width = left + int(float(t_end) * px) + 40
    height = top + lane_h * max(len(processors), 1) + 40

    task_proc = {}
    if net is not None:
        task_proc.update(net.annotations.get("task_processor", {}))
    for s in segments:
        task_proc.setdefault(s.task, s.processor)
    act_task = {}
    if net is not None:
        act_task.update(net.annotations.get("activation_action", {}))

    def lane_y(proc):
        return top + processors.index(proc) * lane_h

    def tx(t):
        return left + float(t) * px

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    axis_y = top + lane_h * max(len(processors), 1) + 8
    t = 0
    while t <= t_end:
        lines.append(
            f'  <line x1="{tx(t):.1f}" y1="{top}" x2="{tx(t):.1f}" y2="{axis_y}" stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'  <text x="{tx(t):.1f}" y="{axis_y + 12}" font-size="9" text-anchor="middle" '
            f'font-family="monospace">{t}</text>'
        )
        t += 1
    palette = ["#9fc5e8", "#f9cb9c", "#b6d7a8", "#d5a6bd", "#ffe599", "#a2c4c9", "#ea9999", "#b4a7d6"]
    tasks = sorted({s.task for s in segments} | set(task_proc))
    color = {name: palette[i % len(palette)] for i, name in enumerate(tasks)}
    for proc in processors:
        y = lane_y(proc)
        lines.append(
            f'  <text x="6" y="{y + lane_h // 2 + 4}" font-size="11" font-family="monospace">{escape(proc)}</text>'
        )
        lines.append(
            f'  <line x1="{left}" y1="{y + lane_h - 6}" x2="{width - 20}" y2="{y + lane_h - 6}" '
            f'stroke="#555555" stroke-width="1"/>'
        )
    for s in segments:
        y = lane_y(s.processor)
        w = max((float(s.end) - float(s.start)) * px, 1.0)
        lines.append(
            f'  <rect x="{tx(s.start):.1f}" y="{y + 4}" width="{w:.1f}" height="{lane_h - 12}" '
            f'fill="{color.get(s.task, "#cfe2f3")}" stroke="#333333" stroke-width="0.5">'
            f"<title>{escape(s.task)} [{_fmt(s.start)}, {_fmt(s.end)}]"
            f'{" (preempted)" if s.preempted else ""}</title></rect>'
        )
        lines.append(
            f'  <text x="{tx(s.start) + w / 2:.1f}" y="{y + lane_h // 2 + 3}" font-size="10" '
            f'text-anchor="middle" font-family="monospace">{escape(s.task)}</text>'
        )
        if s.preempted:
            lines.append(
                f'  <line x1="{tx(s.end):.1f}" y1="{y + 2}" x2="{tx(s.end):.1f}" y2="{y + lane_h - 8}" '
                f'stroke="#333333" stroke-width="1.5" stroke-dasharray="2,2"/>'
            )
    for t, action in trace.events:
        task = act_task.get(action)
        if task is None and action.startswith("act"):
            task = action[3:]
        proc = task_proc.get(task)
        if proc is None or proc not in processors:
            continue
        y = lane_y(proc)
        xx = tx(t)
        lines.append(
            f'  <path d="M {xx:.1f} {y + lane_h - 6} L {xx:.1f} {y - 2} M {xx - 3:.1f} {y + 2} '
            f'L {xx:.1f} {y - 2} L {xx + 3:.1f} {y + 2}" stroke="#1155cc" stroke-width="1.2" fill="none">'
            f"<title>{escape(action)} @ {_fmt(t)}</title></path>"
        )
    if trace.miss is not None:
        m = trace.miss
        proc = m.processor if m.processor in processors else task_proc.get(m.task)
        if proc in processors:
            y = lane_y(proc)
            x0, x1 = tx(m.window_start), tx(m.time)
            lines.append(
                f'  <rect x="{x0:.1f}" y="{y + 2}" width="{max(x1 - x0, 2.0):.1f}" height="{lane_h - 8}" '
                f'fill="none" stroke="#cc0000" stroke-width="2">'
                f"<title>deadline miss: {escape(m.task)} window [{_fmt(m.window_start)}, {_fmt(m.time)}]</title></rect>"
            )
            lines.append(
                f'  <text x="{x0:.1f}" y="{y - 2}" font-size="9" fill="#cc0000" '
                f'font-family="monospace">miss {escape(m.task)} @ {_fmt(m.window_start)}</text>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
