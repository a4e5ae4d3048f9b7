"""Discrete-time simulation harness: traces, the model interface, built-ins.

A Trace is a uniformly sampled multi-signal time series. Models implement a
tiny step interface so the falsification loop can drive anything that maps
input samples to output samples deterministically; two built-ins ship with
the package, addressable by preset name from the CLI:

* ``omm-v0`` .. ``omm-v3``: a memoryless two-input/two-output gain model
  with optional cross gains between the channels and saturated outputs.
  The version ladder injects increasing cross-contamination faults.
* ``plant-demo``: a first-order pressure plant under a PI controller, the
  demo target for the steam-condenser style table shipped as ``sc.rt``.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np


class SimError(Exception):
    pass


class SignalMismatchError(SimError):
    pass


class NonFiniteOutputError(SimError):
    pass


class TraceFormatError(SimError):
    pass


@dataclass
class Trace:
    """Uniformly sampled signals; all arrays share one length of at least 1."""

    dt: float
    samples: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.samples:
            raise ValueError("a trace needs at least one signal")
        converted = {}
        length: int | None = None
        for name, values in self.samples.items():
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 1 or arr.size < 1:
                raise ValueError(f"signal '{name}' must be a non-empty 1-d array")
            if length is None:
                length = arr.size
            elif arr.size != length:
                raise ValueError(
                    f"signal '{name}' has {arr.size} samples, expected {length}"
                )
            converted[name] = arr
        self.samples = converted

    @property
    def n_samples(self) -> int:
        return next(iter(self.samples.values())).size

    @property
    def horizon(self) -> float:
        return (self.n_samples - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @property
    def signals(self) -> tuple[str, ...]:
        return tuple(self.samples)

    def values_at(self, k: int) -> dict[str, float]:
        return {name: float(arr[k]) for name, arr in self.samples.items()}


def n_samples_for(horizon: float, dt: float) -> int:
    """Sample count covering [0, horizon] at step dt; a zero horizon is one sample."""
    if horizon < 0 or not (dt > 0):
        raise ValueError("need horizon >= 0 and dt > 0")
    return int(math.floor(horizon / dt)) + 1


class SystemModel(ABC):
    """A deterministic discrete-time system.

    ``reset`` returns a fresh internal state (identical every call, so runs
    are reproducible); ``step`` maps the state and one input sample to the
    output sample for the same instant and advances the state in place.
    """

    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    @abstractmethod
    def reset(self) -> Any: ...

    @abstractmethod
    def step(self, state: Any, inputs: Mapping[str, float], dt: float) -> dict[str, float]: ...


class GainCrossModel(SystemModel):
    """Memoryless two-channel gain block with saturation and cross gains.

    y1 = clamp(g11*u1 + g21*u2), y2 = clamp(g22*u2 + g12*u1); g12 couples
    input 1 into output 2 and g21 couples input 2 into output 1. The default
    saturation floor of -0.49 keeps every output strictly above -0.5, so a
    requirement demanding outputs above -0.5 can never be violated while one
    demanding positive outputs can be, once a cross gain is non-zero.
    """

    inputs = ("u1", "u2")
    outputs = ("y1", "y2")

    def __init__(
        self,
        g11: float = 1.0,
        g22: float = 1.0,
        g12: float = 0.0,
        g21: float = 0.0,
        clamp: tuple[float, float] = (-0.49, 10.2),
    ):
        self.g11 = g11
        self.g22 = g22
        self.g12 = g12
        self.g21 = g21
        self.clamp = clamp

    def reset(self) -> None:
        return None

    def step(self, state: None, inputs: Mapping[str, float], dt: float) -> dict[str, float]:
        lo, hi = self.clamp
        u1, u2 = inputs["u1"], inputs["u2"]
        return {
            "y1": min(max(self.g11 * u1 + self.g21 * u2, lo), hi),
            "y2": min(max(self.g22 * u2 + self.g12 * u1, lo), hi),
        }


class PlantDemoModel(SystemModel):
    """First-order pressure plant with a PI controller on the cooling flow.

    The steam flow F_s drives the pressure state up, the controller drives
    it back toward the setpoint, and the temperature output is an algebraic
    blend of pressure and flow. Forward-Euler integration; intended for
    traces with dt around the 0.01 s default. Not a physical model, just a
    bounded, falsifiable demo plant.
    """

    inputs = ("F_s",)
    outputs = ("T_s", "P_s")

    default_dt = 0.01

    def __init__(
        self,
        time_constant: float = 5.0,
        kp: float = 2.5,
        ki: float = 0.8,
        setpoint: float = 87.25,
        initial_pressure: float = 87.0,
        nominal_flow: float = 4.0,
    ):
        self.time_constant = time_constant
        self.kp = kp
        self.ki = ki
        self.setpoint = setpoint
        self.initial_pressure = initial_pressure
        self.nominal_flow = nominal_flow
        self.integrator_limit = 50.0

    def reset(self) -> list[float]:
        # pre-warm the integrator at the nominal operating point so the run
        # starts near equilibrium instead of with a cold-start transient
        cooling_eq = (2.0 * self.nominal_flow - 0.05 * (self.setpoint - 80.0)) / 0.8
        return [self.initial_pressure, cooling_eq / self.ki]

    def step(self, state: list[float], inputs: Mapping[str, float], dt: float) -> dict[str, float]:
        pressure, integral = state
        flow = inputs["F_s"]
        outputs = {
            "T_s": 35.0 + 0.5 * pressure + 0.2 * flow,
            "P_s": pressure,
        }
        error = pressure - self.setpoint  # cooling ramps up when pressure is high
        integral = min(max(integral + error * dt, -self.integrator_limit), self.integrator_limit)
        cooling = self.kp * error + self.ki * integral
        dp = (2.0 * flow - 0.8 * cooling - 0.05 * (pressure - 80.0)) / self.time_constant
        state[0] = pressure + dt * dp
        state[1] = integral
        return outputs


def simulate(model: SystemModel, inputs: Trace) -> Trace:
    """Run the model over an input trace; returns inputs and outputs merged.

    Raises SignalMismatchError when the trace lacks a declared model input
    and NonFiniteOutputError when the model emits NaN or infinity.
    """
    missing = [s for s in model.inputs if s not in inputs.samples]
    if missing:
        raise SignalMismatchError(f"input trace is missing signals: {', '.join(missing)}")
    n = inputs.n_samples
    out_arrays = {name: np.empty(n) for name in model.outputs}
    state = model.reset()
    for k in range(n):
        row = inputs.values_at(k)
        produced = model.step(state, row, inputs.dt)
        for name in model.outputs:
            value = produced[name]
            if not math.isfinite(value):
                raise NonFiniteOutputError(
                    f"model output '{name}' is {value!r} at t={k * inputs.dt}"
                )
            out_arrays[name][k] = value
    merged = dict(inputs.samples)
    merged.update(out_arrays)
    return Trace(dt=inputs.dt, samples=merged)


# --- CSV interchange --------------------------------------------------------


def write_trace_csv(trace: Trace, path: str) -> None:
    """Write a trace as CSV with the time column first, signals in declared order."""
    times = trace.times
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *trace.signals])
        for k in range(trace.n_samples):
            writer.writerow(
                [repr(float(times[k])), *(repr(float(trace.samples[s][k])) for s in trace.signals)]
            )


def read_trace_csv(path: str) -> Trace:
    """Read a trace written by write_trace_csv (or compatible).

    The first column must be a uniformly spaced time axis starting at 0;
    the step size is inferred from it.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: empty file") from None
        if not header or header[0] != "t":
            raise TraceFormatError(f"{path}: first column must be 't'")
        names = header[1:]
        if not names:
            raise TraceFormatError(f"{path}: no signal columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < 2:
        raise TraceFormatError(f"{path}: need at least two samples to infer dt")
    data = np.asarray(rows)
    times = data[:, 0]
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=0, atol=1e-9 * max(dt, 1.0)):
        raise TraceFormatError(f"{path}: time column is not uniformly spaced")
    return Trace(dt=dt, samples={name: data[:, j + 1] for j, name in enumerate(names)})


# --- model presets -----------------------------------------------------------


@dataclass(frozen=True)
class ModelPreset:
    """A named model factory plus the default search box for its inputs."""

    name: str
    factory: Callable[[], SystemModel]
    input_bounds: dict[str, tuple[float, float]]
    horizon: float
    dt: float
    description: str = ""


_OMM_BOUNDS = {"u1": (-100.0, 100.0), "u2": (-100.0, 100.0)}

MODEL_PRESETS: dict[str, ModelPreset] = {
    preset.name: preset
    for preset in (
        ModelPreset(
            name="omm-v0",
            factory=lambda: GainCrossModel(),
            input_bounds=dict(_OMM_BOUNDS),
            horizon=10.0,
            dt=0.5,
            description="gain model, no cross gains",
        ),
        ModelPreset(
            name="omm-v1",
            factory=lambda: GainCrossModel(g12=0.01),
            input_bounds=dict(_OMM_BOUNDS),
            horizon=10.0,
            dt=0.5,
            description="0.01 gain from input 1 into output 2",
        ),
        ModelPreset(
            name="omm-v2",
            factory=lambda: GainCrossModel(g12=0.01, g21=0.01),
            input_bounds=dict(_OMM_BOUNDS),
            horizon=10.0,
            dt=0.5,
            description="0.01 cross gains in both directions",
        ),
        ModelPreset(
            name="omm-v3",
            factory=lambda: GainCrossModel(g12=0.01, g21=0.1),
            input_bounds=dict(_OMM_BOUNDS),
            horizon=10.0,
            dt=0.5,
            description="0.01 gain into output 2, 0.1 gain into output 1",
        ),
        ModelPreset(
            name="plant-demo",
            factory=PlantDemoModel,
            input_bounds={"F_s": (3.5, 4.5)},
            horizon=35.0,
            dt=0.01,
            description="PI-controlled pressure plant demo",
        ),
    )
}


def make_model(name: str) -> SystemModel:
    try:
        preset = MODEL_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(MODEL_PRESETS))
        raise KeyError(f"unknown model '{name}' (known: {known})") from None
    return preset.factory()
