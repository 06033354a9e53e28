"""Constraint-preserving QAOA simulated on an exact statevector.

Qubits in a one-hot group start in a W state and mix under the all-pairs XY
Hamiltonian, applied exactly rather than as a product of pair rotations, which
keeps exactly one qubit of the group set; the remaining qubits
start in |+> and mix through single X rotations.  The mixer is signed so that
the initial state is its ground state, which makes the ramp anneal towards low
cost.  The angles follow a fixed linear ramp, so there is no outer parameter
optimisation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..qubo.core import Qubo
from .base import SolverResult

MAX_QUBITS = 20


class QaoaError(ValueError):
    pass


@dataclass(frozen=True)
class QaoaParams:
    p: int = 3
    shots: int = 1024
    max_qubits: int = MAX_QUBITS
    cost_scale: float = np.pi     # phase spread of the normalised cost at gamma = 1

    def __post_init__(self):
        if self.p < 1:
            raise QaoaError("depth must be >= 1")
        if self.shots < 1:
            raise QaoaError("shots must be >= 1")


def ramp(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Cost angles gamma_i = (i-1)/(p-1) and mixer angles beta_i = 1 - gamma_i; 1/2 each for p = 1."""
    if p == 1:
        return np.array([0.5]), np.array([0.5])
    gam = np.arange(p) / (p - 1)
    return gam, 1.0 - gam


def basis_energies(qubo: Qubo) -> np.ndarray:
    """Energy of every basis state; qubit i is bit i of the state index."""
    n = qubo.n
    idx = np.arange(1 << n, dtype=np.int64)
    bits = [((idx >> i) & 1).astype(bool) for i in range(n)]
    e = np.full(1 << n, qubo.offset)
    m = qubo.matrix.tocoo()
    for i, j, v in zip(m.row, m.col, m.data):
        e[bits[i] & bits[j]] += v
    return e


def subspace_mask(n: int, groups) -> np.ndarray:
    """Basis states with exactly one set qubit in every group."""
    idx = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(1 << n, dtype=bool)
    for g in groups:
        count = np.zeros(1 << n, dtype=np.int64)
        for q in g:
            count += (idx >> q) & 1
        ok &= count == 1
    return ok


def initial_state(n: int, groups) -> np.ndarray:
    grouped = {q for g in groups for q in g}
    free = n - len(grouped)
    amp = np.prod([1.0 / np.sqrt(len(g)) for g in groups]) * 0.5 ** (free / 2)
    psi = np.zeros(1 << n, dtype=complex)
    psi[subspace_mask(n, groups)] = amp
    return psi


def _xy_group(psi, group, beta, n):
    """exp(i beta H) for the all-pairs XY Hamiltonian of one group, exact on its one-hot sector.

    On that sector H is the complete-graph adjacency J - I, whose exponential
    is e^{-i beta} (I + (e^{i beta k} - 1) / k * J).
    """
    k = len(group)
    if k < 2:
        return
    bits = np.array([1 << q for q in group], dtype=np.int64)
    idx = np.arange(1 << n, dtype=np.int64)
    base = idx[(idx & int(bits.sum())) == 0]
    cols = base[:, None] | bits[None, :]
    amp = psi[cols]
    mean = amp.sum(axis=1, keepdims=True) * ((np.exp(1j * beta * k) - 1.0) / k)
    psi[cols] = np.exp(-1j * beta) * (amp + mean)


def _x(psi, i, beta, n):
    idx = np.arange(1 << n, dtype=np.int64)
    lo = idx[((idx >> i) & 1) == 0]
    hi = lo | (1 << i)
    c, s = np.cos(beta), 1j * np.sin(beta)
    p0, p1 = psi[lo].copy(), psi[hi]
    psi[lo] = c * p0 + s * p1
    psi[hi] = c * p1 + s * p0


def statevector(qubo: Qubo, groups, p: int, energies=None,
                cost_scale: float = np.pi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Final state plus the (gamma, beta) angles applied.

    The cost phase uses energies mapped onto [0, cost_scale] over the one-hot
    subspace so that the unit-range ramp means the same for any model scale.
    """
    n = qubo.n
    groups = [list(g) for g in groups]
    if any(len(g) == 0 for g in groups):
        raise QaoaError("empty one-hot group")
    seen = [q for g in groups for q in g]
    if len(set(seen)) != len(seen) or any(not 0 <= q < n for q in seen):
        raise QaoaError("groups must be disjoint qubit indices")
    e = basis_energies(qubo) if energies is None else energies
    mask = subspace_mask(n, groups)
    lo, hi = e[mask].min(), e[mask].max()
    e_norm = cost_scale * (e - lo) / (hi - lo) if hi > lo else np.zeros_like(e)
    psi = initial_state(n, groups)
    grouped = set(seen)
    gam, bet = ramp(p)
    for g_t, b_t in zip(gam, bet):
        psi *= np.exp(-1j * g_t * e_norm)
        for g in groups:
            _xy_group(psi, g, b_t, n)
        for q in range(n):
            if q not in grouped:
                _x(psi, q, b_t, n)
    return psi, gam, bet


def leakage(psi: np.ndarray, n: int, groups) -> float:
    return float(np.sum(np.abs(psi[~subspace_mask(n, groups)]) ** 2))


def qaoa_solve(qubo: Qubo, groups, params: QaoaParams = QaoaParams(), rng=None) -> SolverResult:
    """Sample the ramped circuit and return the lowest-energy sample."""
    rng = np.random.default_rng(rng)
    n = qubo.n
    if n > params.max_qubits:
        raise QaoaError(f"{n} qubits exceed the simulator cap of {params.max_qubits}")
    e = basis_energies(qubo)
    psi, gam, bet = statevector(qubo, groups, params.p, e, params.cost_scale)
    leak = leakage(psi, n, groups)
    if leak > 1e-10:
        raise QaoaError(f"probability {leak:.3g} leaked out of the one-hot subspace")
    prob = np.abs(psi) ** 2
    prob /= prob.sum()
    draws = rng.choice(prob.size, size=params.shots, p=prob)
    states, counts = np.unique(draws, return_counts=True)
    best = states[np.argmin(e[states])]
    x = ((best >> np.arange(n)) & 1).astype(np.int8)
    table = [("".join(str((s >> q) & 1) for q in range(n)), int(c), float(e[s]))
             for s, c in zip(states, counts)]
    return SolverResult(x, float(e[best]), [(1, float(e[best]), float(e[best]))],
                        {"gammas": gam, "betas": bet, "leakage": leak, "samples": table})


def samples_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bitstring", "count", "energy"])
    for row in sorted(table, key=lambda r: (-r[1], r[0])):
        w.writerow([row[0], row[1], repr(row[2])])
    return buf.getvalue()
