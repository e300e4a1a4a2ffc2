"""rtforge: real-time system models compiled to stopwatch timed automata,
verified by exhaustive digitized exploration and parameter-grid sweeps."""

from .model import (
    Const,
    Diagnostic,
    FpsNonPreemptive,
    FpsPreemptive,
    ModelError,
    Param,
    Periodic,
    Processor,
    Rms,
    RtModel,
    Sporadic,
    Task,
    Tdma,
    Triggered,
    ValidatedModel,
    const,
    derive_rms_priorities,
    validate,
)
from .pta import Automaton, Edge, Guard, GuardAtom, Location, ParamDecl, PtaNetwork, substitute, well_formed
from .translate import NamingScheme, translate
from .engine import (
    ConcreteState,
    GanttSegment,
    MissInfo,
    ScaledNetwork,
    StateLimitExceeded,
    TimedTrace,
    TraceRejected,
    Verdict,
    check_schedulability,
    extract_gantt,
    initial_state,
    replay,
    scale,
    successors,
    validate_trace,
)
from .emit import emit_imitator
from .sweep import (
    ConstraintSet,
    ParameterGrid,
    Region,
    compare_region,
    evaluate_constraints,
    grid,
    region_to_csv,
    region_to_json,
    structural_feasibility,
    sweep,
)
from .report import gantt_to_svg, region_to_svg

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
