"""Compile requirements tables into three-phase monitor machines and run them.

Each requirement becomes one parallel machine with phases PRC (checking the
precondition), WT (precondition held, waiting out the duration) and POA
(postcondition active). Machines take at most one transition per time step:

    PRC -> POA   precondition holds, no (or zero) duration
    PRC -> WT    precondition holds, positive duration; the timer starts
    WT  -> PRC   precondition stopped holding before the duration elapsed
    WT  -> POA   elapsed time reached the duration with the guard still held
    POA -> PRC   precondition stopped holding

A machine emits +inf while in PRC or WT and the postcondition's satisfaction
degree while in POA (including the entry step). Actions attached to a
requirement execute on every step its machine spends in POA; if the table
declares outputs, every output must be assigned on every step, otherwise
the run stops with MissingActionError, mirroring how an unset table output
aborts a simulation.

prev(...) reads go through a one-step delay buffer seeded with the declared
initial values, so step 0 sees the init values and step k sees step k-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .aggregate import RunningMin, aggregate_step, finalize
from .expr import BoolExpr, Env, degree, eval_arith, eval_bool
from .table import (
    Assignment,
    RequirementsTable,
    TableValidationError,
    prev_signals,
    validate,
)

INF = math.inf

# absorbs float accumulation in the elapsed-time comparison, scaled by dt
ET_TOLERANCE = 1e-9


class Phase(Enum):
    PRC = "PRC"
    WT = "WT"
    POA = "POA"


class MonitorError(Exception):
    pass


class MissingActionError(MonitorError):
    def __init__(self, output: str, t: float):
        super().__init__(f"output '{output}' received no assignment at t={t}")
        self.output = output
        self.t = t


class ConflictingActionError(MonitorError):
    def __init__(self, output: str, t: float, first: float, second: float):
        super().__init__(
            f"output '{output}' assigned conflicting values {first!r} and {second!r} at t={t}"
        )
        self.output = output
        self.t = t


@dataclass(frozen=True)
class CompiledRequirement:
    """One requirement ready for execution: guard, timer, degree source, actions."""

    index: int
    guard: BoolExpr | None  # None means always satisfied
    duration: float | None
    postcondition: BoolExpr | None
    actions: tuple[Assignment, ...]

    @property
    def has_waiting_phase(self) -> bool:
        """True when the machine can dwell in WT; a zero duration elapses at entry."""
        return self.duration is not None and self.duration > 0


@dataclass(frozen=True)
class MonitorAutomaton:
    """Immutable compiled table: one parallel machine per requirement."""

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    requirements: tuple[CompiledRequirement, ...]
    prev_signals: tuple[str, ...]
    initial_values: dict[str, float]

    @property
    def requirement_indexes(self) -> tuple[int, ...]:
        return tuple(r.index for r in self.requirements)


def compile_table(table: RequirementsTable) -> MonitorAutomaton:
    """Build the monitor automaton for a validated table.

    Raises TableValidationError when the table breaks a static rule, so a
    compiled automaton can always be executed without name errors.
    """
    diagnostics = validate(table)
    if diagnostics:
        raise TableValidationError(diagnostics)
    return MonitorAutomaton(
        name=table.name,
        inputs=table.inputs,
        outputs=table.outputs,
        requirements=tuple(
            CompiledRequirement(
                index=req.index,
                guard=req.precondition,
                duration=req.duration,
                postcondition=req.postcondition,
                actions=req.actions,
            )
            for req in table.requirements
        ),
        prev_signals=prev_signals(table),
        initial_values=dict(table.initial_values),
    )


class MonitorState:
    """Mutable runtime state of one monitored run; single-owner.

    After init or a step, ``step_degrees`` and ``action_outputs`` hold what
    the machines emitted for the step just processed.
    """

    __slots__ = (
        "automaton",
        "phases",
        "entry_times",
        "prev_buffer",
        "last_t",
        "step_degrees",
        "action_outputs",
    )

    def __init__(self, automaton: MonitorAutomaton):
        self.automaton = automaton
        self.phases: list[Phase] = [Phase.PRC] * len(automaton.requirements)
        self.entry_times: list[float] = [0.0] * len(automaton.requirements)
        self.prev_buffer: dict[str, float] = dict(automaton.initial_values)
        self.last_t = 0.0
        self.step_degrees: list[float] = []
        self.action_outputs: dict[str, float] = {}


def _guard_holds(req: CompiledRequirement, env: Env) -> bool:
    return True if req.guard is None else eval_bool(req.guard, env)


def monitor_init(
    automaton: MonitorAutomaton, signals: Mapping[str, float], t0: float = 0.0
) -> MonitorState:
    """Start a run at time t0 and process the first step.

    A machine whose guard already holds enters POA directly (WT when the
    requirement has a positive duration); step-0 degrees and actions are
    produced immediately.
    """
    state = MonitorState(automaton)
    env = Env(signals=signals, prev=state.prev_buffer, t=t0)
    for i, req in enumerate(automaton.requirements):
        if _guard_holds(req, env):
            if req.has_waiting_phase:
                state.phases[i] = Phase.WT
                state.entry_times[i] = t0
            else:
                state.phases[i] = Phase.POA
        else:
            state.phases[i] = Phase.PRC
    _emit(state, signals, t0)
    state.last_t = t0
    return state


def monitor_step(
    state: MonitorState, signals: Mapping[str, float], t: float
) -> tuple[MonitorState, list[float], dict[str, float]]:
    """Advance every machine by at most one transition and emit the step.

    ``t`` must exceed the previous step's time by the trace step size.
    Returns the (mutated) state plus the degrees and action outputs of this
    step.
    """
    automaton = state.automaton
    dt = t - state.last_t
    tolerance = ET_TOLERANCE * dt
    env = Env(signals=signals, prev=state.prev_buffer, t=t)
    for i, req in enumerate(automaton.requirements):
        phase = state.phases[i]
        holds = _guard_holds(req, env)
        if phase is Phase.PRC:
            if holds:
                if req.has_waiting_phase:
                    state.phases[i] = Phase.WT
                    state.entry_times[i] = t
                else:
                    state.phases[i] = Phase.POA
        elif phase is Phase.WT:
            if not holds:
                state.phases[i] = Phase.PRC
            elif t - state.entry_times[i] >= req.duration - tolerance:
                state.phases[i] = Phase.POA
        else:  # POA
            if not holds:
                state.phases[i] = Phase.PRC
    degrees, outputs = _emit(state, signals, t)
    state.last_t = t
    return state, degrees, outputs


def _emit(
    state: MonitorState, signals: Mapping[str, float], t: float
) -> tuple[list[float], dict[str, float]]:
    automaton = state.automaton
    env = Env(signals=signals, prev=state.prev_buffer, t=t)

    outputs: dict[str, float] = {}
    for i, req in enumerate(automaton.requirements):
        if state.phases[i] is not Phase.POA:
            continue
        for action in req.actions:
            value = eval_arith(action.value, env)
            if action.target in outputs and outputs[action.target] != value:
                raise ConflictingActionError(action.target, t, outputs[action.target], value)
            outputs[action.target] = value
    for output in automaton.outputs:
        if output not in outputs:
            raise MissingActionError(output, t)

    post_env = Env(signals={**signals, **outputs}, prev=state.prev_buffer, t=t) if outputs else env
    degrees = [
        degree(req.postcondition, post_env)
        if state.phases[i] is Phase.POA and req.postcondition is not None
        else INF
        for i, req in enumerate(automaton.requirements)
    ]

    for sig in automaton.prev_signals:
        if sig in outputs:
            state.prev_buffer[sig] = outputs[sig]
        elif sig in signals:
            state.prev_buffer[sig] = signals[sig]
        else:
            raise MissingActionError(sig, t)

    state.step_degrees = degrees
    state.action_outputs = outputs
    return degrees, outputs


@dataclass
class MonitorRun:
    """Everything one monitored run produced."""

    times: list[float]
    requirement_indexes: tuple[int, ...]
    degrees: list[list[float]]  # [step][requirement]
    running: list[float]  # running minimum after each step
    outputs: dict[str, list[float]]
    fitness: float


def run_monitor(automaton: MonitorAutomaton, trace) -> MonitorRun:
    """Execute the automaton over a whole trace and aggregate the fitness.

    The trace must contain every table input at a uniform step; errors from
    individual steps (missing or conflicting actions, unbound names)
    propagate.
    """
    from .sim import SignalMismatchError, Trace

    if not isinstance(trace, Trace):
        raise TypeError("run_monitor expects a Trace")
    missing = [s for s in automaton.inputs if s not in trace.samples]
    if missing:
        raise SignalMismatchError(f"trace is missing table inputs: {', '.join(missing)}")

    times = trace.times
    degrees_rows: list[list[float]] = []
    running: list[float] = []
    outputs: dict[str, list[float]] = {name: [] for name in automaton.outputs}
    acc = RunningMin()

    state: MonitorState | None = None
    for k in range(trace.n_samples):
        row = trace.values_at(k)
        t = float(times[k])
        if state is None:
            state = monitor_init(automaton, row, t)
            step_degrees, step_outputs = state.step_degrees, state.action_outputs
        else:
            _, step_degrees, step_outputs = monitor_step(state, row, t)
        degrees_rows.append(list(step_degrees))
        acc = aggregate_step(acc, step_degrees)
        running.append(acc.current)
        for name in automaton.outputs:
            outputs[name].append(step_outputs[name])

    return MonitorRun(
        times=[float(x) for x in times],
        requirement_indexes=automaton.requirement_indexes,
        degrees=degrees_rows,
        running=running,
        outputs=outputs,
        fitness=finalize(acc),
    )


def write_degree_csv(run: MonitorRun, path: str) -> None:
    """Write the per-step degrees as CSV: t, ff_1..ff_n, ff_total_running."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", *(f"ff_{idx}" for idx in run.requirement_indexes), "ff_total_running"]
        )
        for t, row, total in zip(run.times, run.degrees, run.running):
            writer.writerow([repr(t), *(repr(d) for d in row), repr(total)])
