"""Single-flip Metropolis simulated annealing on an Ising model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..qubo.core import IsingModel, spins_to_bits
from .base import SolverResult


@dataclass(frozen=True)
class SaParams:
    steps: int = 1000
    beta_start: float | None = None   # None: derived from the coupling scale
    beta_end: float | None = None
    trace_every: int = 0              # 0: one trace row per sweep of n proposals

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        for b in (self.beta_start, self.beta_end):
            if b is not None and not b > 0:
                raise ValueError("inverse temperatures must be positive")


def default_betas(ising: IsingModel) -> tuple[float, float]:
    """Hot end accepts the largest possible single-flip rise with probability 1/2; the cold
    end accepts a rise of 5% of it with probability 1/100."""
    J = abs(ising.J).tocsr()
    big = 2.0 * (2.0 * np.asarray(J.sum(axis=1)).ravel() + np.abs(ising.h))
    top = big.max(initial=0.0)
    if top == 0:
        return 1.0, 1.0
    return math.log(2) / top, math.log(100) / (0.05 * top)


def sa_solve(ising: IsingModel, params: SaParams = SaParams(), s0=None, rng=None) -> SolverResult:
    """Anneal from ``s0`` (random if omitted) along a geometric inverse-temperature ramp.

    ``params.steps`` counts single-spin proposals.  The best state visited is returned.
    """
    rng = np.random.default_rng(rng)
    n = ising.n
    s = rng.choice(np.array([-1, 1], dtype=np.int8), n) if s0 is None else np.array(s0, dtype=np.int8)
    if n == 0:
        return SolverResult(np.zeros(0, dtype=np.int8), ising.offset)
    b0, b1 = default_betas(ising)
    b0 = params.beta_start if params.beta_start is not None else b0
    b1 = params.beta_end if params.beta_end is not None else max(b1, b0)
    betas = b0 * (b1 / b0) ** (np.arange(params.steps) / max(params.steps - 1, 1))

    J = ising.J.tocsr()
    indptr, indices, data = J.indptr, J.indices, J.data
    field = 2.0 * (J @ s) + ising.h          # dH/ds_i
    energy = ising.energy(s) + ising.offset
    best_e, best_s = energy, s.copy()
    every = params.trace_every or n
    picks = rng.integers(n, size=params.steps)
    draws = rng.random(params.steps)
    trace = []
    for t in range(params.steps):
        i = picks[t]
        delta = -2.0 * s[i] * field[i]
        if delta <= 0 or draws[t] < math.exp(-betas[t] * delta):
            lo, hi = indptr[i], indptr[i + 1]
            field[indices[lo:hi]] -= 4.0 * data[lo:hi] * s[i]
            s[i] = -s[i]
            energy += delta
            if energy < best_e - 1e-12:
                best_e, best_s = energy, s.copy()
        if (t + 1) % every == 0 or t + 1 == params.steps:
            trace.append((t + 1, energy, best_e))
    x = spins_to_bits(best_s)
    return SolverResult(x, ising.energy(best_s) + ising.offset, trace,
                        {"beta_start": float(b0), "beta_end": float(b1), "spins": best_s})
