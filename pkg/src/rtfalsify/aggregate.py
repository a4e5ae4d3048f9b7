"""Running-minimum aggregation of per-requirement degrees into one fitness.

The fitness of a whole run is the minimum degree emitted by any requirement
at any step. The aggregator keeps that minimum online so the monitor never
has to retain the full degree history; starting from +inf makes an empty
run (or a run where no postcondition ever became active) vacuously
satisfied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class RunningMin:
    """Value-semantic running minimum; ``current`` never increases."""

    current: float = math.inf


def aggregate_step(r: RunningMin, degrees: Iterable[float]) -> RunningMin:
    """Fold one step's degrees into the running minimum.

    An empty degree vector leaves the minimum unchanged.
    """
    current = r.current
    for d in degrees:
        if d < current:
            current = d
    return RunningMin(current)


def finalize(r: RunningMin) -> float:
    """The scalar fitness of the run: negative iff a requirement was violated."""
    return r.current
