"""Result container and trace export shared by the sub-solvers."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolverResult:
    x: np.ndarray                 # binary state
    energy: float                 # QUBO energy of x (Ising energy plus offset)
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def best_trace(self) -> np.ndarray:
        return np.array([t[2] for t in self.trace])


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "objective", "best_objective"])
    for step, obj, best in trace:
        w.writerow([step, repr(float(obj)), repr(float(best))])
    return buf.getvalue()
