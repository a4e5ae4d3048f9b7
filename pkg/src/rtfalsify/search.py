"""Parameterized input encoding and the falsification loop.

Input signals are piecewise constant with a fixed number of discontinuities
per signal, so a whole test input is one bounded parameter vector: k+1
levels plus k switch times per signal. The search minimizes the monitored
fitness over that box and stops at the first test case whose fitness is
negative (a failure-revealing test case, verdict TC); exhausting the budget
yields verdict NFF. Both algorithms are fully reproducible from the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .monitor import MonitorAutomaton, MonitorRun, compile_table, run_monitor
from .sim import SystemModel, Trace, n_samples_for, simulate
from .table import RequirementsTable

INF = math.inf

# stand-in for an infinite fitness inside Metropolis arithmetic
VACUOUS_PENALTY = 1e15

UNIFORM_RANDOM = "uniform-random"
SIMULATED_ANNEALING = "simulated-annealing"
_ALGORITHMS = (UNIFORM_RANDOM, SIMULATED_ANNEALING)


class SearchError(Exception):
    pass


class ArityMismatchError(SearchError):
    pass


class OutOfBoundsError(SearchError):
    pass


@dataclass(frozen=True)
class SignalShape:
    """Piecewise-constant shape of one input signal inside the search box."""

    name: str
    lower: float
    upper: float
    discontinuities: int = 1

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError(f"'{self.name}': lower bound exceeds upper bound")
        if self.discontinuities < 0:
            raise ValueError(f"'{self.name}': discontinuity count must be >= 0")


@dataclass(frozen=True)
class Parameter:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class ParameterizedInput:
    """Family of input traces indexed by one bounded parameter vector.

    Parameters are laid out per signal: level_0 .. level_k then
    switch_1 .. switch_k, with levels bounded by the signal's range and
    switch times by [0, horizon]. Any in-bounds vector instantiates to a
    valid trace over the full horizon; switch times are sorted before use,
    so their order in the vector does not matter.
    """

    shapes: tuple[SignalShape, ...]
    horizon: float
    dt: float

    def __post_init__(self) -> None:
        if not self.shapes:
            raise ValueError("need at least one input signal")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if not (self.dt > 0):
            raise ValueError("dt must be > 0")

    @property
    def parameters(self) -> tuple[Parameter, ...]:
        params: list[Parameter] = []
        for shape in self.shapes:
            k = shape.discontinuities
            for j in range(k + 1):
                params.append(Parameter(f"{shape.name}_level{j}", shape.lower, shape.upper))
            for j in range(1, k + 1):
                params.append(Parameter(f"{shape.name}_switch{j}", 0.0, self.horizon))
        return tuple(params)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        params = self.parameters
        return (
            np.array([p.lower for p in params]),
            np.array([p.upper for p in params]),
        )

    def instantiate(self, params: Sequence[float]) -> Trace:
        """Build the input trace for one parameter vector."""
        spec = self.parameters
        values = np.asarray(params, dtype=float)
        if values.shape != (len(spec),):
            raise ArityMismatchError(f"expected {len(spec)} parameters, got {values.shape}")
        for p, v in zip(spec, values):
            if not (p.lower <= v <= p.upper):
                raise OutOfBoundsError(f"{p.name}={v!r} outside [{p.lower}, {p.upper}]")

        times = np.arange(n_samples_for(self.horizon, self.dt)) * self.dt
        samples: dict[str, np.ndarray] = {}
        offset = 0
        for shape in self.shapes:
            k = shape.discontinuities
            levels = values[offset : offset + k + 1]
            switches = np.sort(values[offset + k + 1 : offset + 2 * k + 1])
            offset += 2 * k + 1
            # value at time u is the level of the last switch at or before u
            segment = np.searchsorted(switches, times, side="right")
            samples[shape.name] = levels[segment]
        return Trace(dt=self.dt, samples=samples)


def instantiate(pi: ParameterizedInput, params: Sequence[float]) -> Trace:
    return pi.instantiate(params)


@dataclass(frozen=True)
class SAConfig:
    """Simulated-annealing knobs; defaults are in fitness and range units."""

    initial_temperature: float = 1.0
    cooling: float = 0.97
    proposal_scale: float = 0.1

    def __post_init__(self) -> None:
        if not (self.initial_temperature > 0):
            raise ValueError("initial temperature must be > 0")
        if not (0 < self.cooling < 1):
            raise ValueError("cooling factor must be in (0, 1)")
        if not (0 < self.proposal_scale <= 1):
            raise ValueError("proposal scale must be in (0, 1]")


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = UNIFORM_RANDOM
    budget: int = 1500
    seed: int = 0
    sa: SAConfig = field(default_factory=SAConfig)

    def __post_init__(self) -> None:
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"algorithm must be one of {_ALGORITHMS}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")


@dataclass
class Evaluation:
    """Artifacts of one falsification iteration."""

    fitness: float
    trace: Trace
    run: MonitorRun


@dataclass
class FalsificationResult:
    verdict: str  # "TC" or "NFF"
    best_params: np.ndarray
    best_fitness: float
    iterations: int
    violated: tuple[int, ...]
    history: list[float]
    best_evaluation: Evaluation

    @property
    def failure_found(self) -> bool:
        return self.verdict == "TC"


def evaluate(
    model: SystemModel,
    table: RequirementsTable | MonitorAutomaton,
    pi: ParameterizedInput,
    params: Sequence[float],
) -> Evaluation:
    """One falsification iteration: instantiate, simulate, monitor, aggregate."""
    automaton = table if isinstance(table, MonitorAutomaton) else compile_table(table)
    inputs = pi.instantiate(params)
    merged = simulate(model, inputs)
    run = run_monitor(automaton, merged)
    return Evaluation(fitness=run.fitness, trace=merged, run=run)


def violated_requirements(run: MonitorRun) -> tuple[int, ...]:
    """Indexes of requirements whose degree hit the (negative) overall minimum."""
    if not (run.fitness < 0):
        return ()
    hit = []
    for j, idx in enumerate(run.requirement_indexes):
        if any(row[j] == run.fitness for row in run.degrees):
            hit.append(idx)
    return tuple(hit)


def _finite_fitness(x: float) -> float:
    return min(max(x, -VACUOUS_PENALTY), VACUOUS_PENALTY)


def _metropolis_delta(proposal_fitness: float, current_fitness: float) -> float:
    return _finite_fitness(proposal_fitness) - _finite_fitness(current_fitness)


def acceptance_probability(delta: float, temperature: float) -> float:
    """Metropolis rule: improving moves always pass, worsening ones decay."""
    if delta <= 0:
        return 1.0
    return math.exp(-delta / temperature)


def sa_step(
    objective: Callable[[np.ndarray], float],
    pi: ParameterizedInput,
    current: np.ndarray,
    current_fitness: float,
    temperature: float,
    proposal_scale: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, bool]:
    """Propose and evaluate one annealing move.

    The proposal adds per-dimension Gaussian noise with standard deviation
    ``proposal_scale`` times the parameter range, clamped back into the box.
    Returns (proposal, proposal fitness, accepted); on rejection the caller
    keeps its current point.
    """
    lows, highs = pi.bounds
    noise = rng.normal(0.0, 1.0, size=current.shape) * proposal_scale * (highs - lows)
    proposal = np.clip(current + noise, lows, highs)
    proposal_fitness = objective(proposal)
    delta = _metropolis_delta(proposal_fitness, current_fitness)
    accepted = rng.random() < acceptance_probability(delta, temperature)
    return proposal, proposal_fitness, accepted


def falsify(
    model: SystemModel,
    table: RequirementsTable | MonitorAutomaton,
    pi: ParameterizedInput,
    cfg: SearchConfig,
) -> FalsificationResult:
    """Search the input box for a negative-fitness test case.

    Stops at the first iteration whose fitness is negative (verdict TC) or
    when the budget is exhausted (verdict NFF). Identical configuration and
    seed give identical results, including the fitness history.
    """
    automaton = table if isinstance(table, MonitorAutomaton) else compile_table(table)
    lows, highs = pi.bounds
    rng = np.random.default_rng(cfg.seed)

    history: list[float] = []
    best_fitness = INF
    best_params: np.ndarray | None = None

    def record(params: np.ndarray, fitness: float) -> None:
        nonlocal best_fitness, best_params
        history.append(fitness)
        if best_params is None or fitness < best_fitness:
            best_fitness = fitness
            best_params = params

    def objective(params: np.ndarray) -> float:
        return evaluate(model, automaton, pi, params).fitness

    if cfg.algorithm == UNIFORM_RANDOM:
        for _ in range(cfg.budget):
            params = rng.uniform(lows, highs)
            record(params, objective(params))
            if best_fitness < 0:
                break
    else:
        current = rng.uniform(lows, highs)
        current_fitness = objective(current)
        record(current, current_fitness)
        temperature = cfg.sa.initial_temperature
        while best_fitness >= 0 and len(history) < cfg.budget:
            proposal, proposal_fitness, accepted = sa_step(
                objective, pi, current, current_fitness, temperature, cfg.sa.proposal_scale, rng
            )
            record(proposal, proposal_fitness)
            if accepted:
                current, current_fitness = proposal, proposal_fitness
            temperature *= cfg.sa.cooling

    assert best_params is not None
    # re-run the winning point to recover its trace and degree history;
    # evaluation is pure, so this reproduces the recorded fitness exactly
    best_eval = evaluate(model, automaton, pi, best_params)
    verdict = "TC" if best_fitness < 0 else "NFF"
    return FalsificationResult(
        verdict=verdict,
        best_params=best_params,
        best_fitness=best_fitness,
        iterations=len(history),
        violated=violated_requirements(best_eval.run),
        history=history,
        best_evaluation=best_eval,
    )
