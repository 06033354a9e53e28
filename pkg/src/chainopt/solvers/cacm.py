"""Chaotic amplitude control with momentum (CACm).

Integrates

    gamma u'' + u' = -lam(t) u - beta e * grad V(m),   m = tanh(u / 2)
    e' = -xi (m * m - a) e

with explicit Euler steps, where V(m) = m^T J m + h.m is the relaxed Ising
energy.  ``lam`` moves linearly from ``lam1`` to ``lam2``.  The sign pattern of
``m`` is read out after every step and the best state seen is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..qubo.core import IsingModel, spins_to_bits
from .base import SolverResult

GUARD = 1e3


@dataclass(frozen=True)
class CacmParams:
    lam1: float = 0.5
    lam2: float = 1.0
    gamma: float = 0.2
    beta: float = 0.1
    xi: float = 10.0
    a: float = 0.1
    T: int = 2000
    dt: float = 0.05

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.dt > 0 or not self.a > 0:
            raise ValueError("dt and a must be positive")
        if self.gamma < 0 or self.xi < 0 or self.beta < 0:
            raise ValueError("gamma, beta and xi must be non-negative")

    def with_values(self, **kw) -> "CacmParams":
        return replace(self, **kw)


def _phi(u):
    return np.tanh(0.5 * u)


def cacm_solve(ising: IsingModel, params: CacmParams = CacmParams(), s0=None, rng=None,
               normalize: bool = True) -> SolverResult:
    """Run the CACm flow from spins ``s0`` (random if omitted).

    With ``normalize`` the couplings and fields are divided by their largest
    magnitude so that a single parameter set transfers across models.
    """
    rng = np.random.default_rng(rng)
    n = ising.n
    if n == 0:
        return SolverResult(np.zeros(0, dtype=np.int8), ising.offset)
    s0 = rng.choice(np.array([-1, 1], dtype=np.int8), n) if s0 is None else np.asarray(s0, dtype=np.int8)
    J, h = ising.J.tocsr(), np.asarray(ising.h, dtype=float)
    scale = 1.0
    if normalize:
        scale = max(np.abs(J.data).max(initial=0.0), np.abs(h).max(initial=0.0)) or 1.0
    Js, hs = J / scale, h / scale

    u = 0.1 * s0 + 0.01 * rng.standard_normal(n)
    v = np.zeros(n)
    e = np.ones(n)
    lams = np.linspace(params.lam1, params.lam2, params.T)
    best_s = np.where(s0 >= 0, 1, -1).astype(np.int8)
    best_e = ising.energy(best_s) + ising.offset
    clamped = False
    trace = []
    for t in range(params.T):
        m = _phi(u)
        grad = 2.0 * (Js @ m) + hs
        force = -lams[t] * u - params.beta * e * grad
        if params.gamma > 0:
            acc = (force - v) / params.gamma
            u = u + params.dt * v
            v = v + params.dt * acc
        else:
            u = u + params.dt * force
        e = e + params.dt * (-params.xi * (m * m - params.a) * e)
        if np.abs(u).max() > GUARD or not np.all(np.isfinite(u)):
            clamped = True
            u = np.clip(np.nan_to_num(u), -GUARD, GUARD)
            v = np.clip(np.nan_to_num(v), -GUARD, GUARD)
        e = np.clip(np.nan_to_num(e, nan=1.0), 0.0, GUARD)
        s = np.where(u >= 0, 1, -1).astype(np.int8)
        energy = ising.energy(s) + ising.offset
        if energy < best_e - 1e-12:
            best_e, best_s = energy, s
        trace.append((t + 1, energy, best_e))
    return SolverResult(spins_to_bits(best_s), ising.energy(best_s) + ising.offset, trace,
                        {"clamped": clamped, "spins": best_s})
