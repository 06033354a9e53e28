"""Exhaustive minimisation for small models (test oracle)."""

from __future__ import annotations

import numpy as np

from ..qubo.core import Qubo
from .base import SolverResult

MAX_VARIABLES = 26
_CHUNK = 1 << 16


class TooLargeError(ValueError):
    pass


def _as_qubo(model) -> Qubo:
    return model if isinstance(model, Qubo) else model.qubo


def index_to_bits(idx, n: int) -> np.ndarray:
    """Bits of ``idx`` with x_0 as the most significant position (lexicographic order)."""
    idx = np.asarray(idx, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[..., None] >> shifts) & 1).astype(np.int8)


def brute_force(model, tol: float = 1e-12) -> SolverResult:
    """Global minimum; among states within ``tol`` of it the lexicographically smallest wins."""
    q = _as_qubo(model)
    n = q.n
    if n > MAX_VARIABLES:
        raise TooLargeError(f"brute force is capped at {MAX_VARIABLES} variables, got {n}")
    Q = q.dense()
    best_e, best_i = np.inf, 0
    for start in range(0, 1 << n, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 1 << n))
        X = index_to_bits(idx, n).astype(float)
        e = np.einsum("ij,ij->i", X @ Q, X)
        m = e.min()
        if m < best_e - tol:
            best_e = m
            best_i = int(idx[np.flatnonzero(e <= m + tol)[0]])
    x = index_to_bits(best_i, n)
    return SolverResult(x, q.energy(x), info={"states": 1 << n})


def brute_force_gray(model, tol: float = 1e-9) -> SolverResult:
    """Same optimum through a Gray-code walk with incremental energy updates.

    Ties are resolved like :func:`brute_force` so the two can be compared directly.
    """
    q = _as_qubo(model)
    n = q.n
    if n > MAX_VARIABLES:
        raise TooLargeError(f"brute force is capped at {MAX_VARIABLES} variables, got {n}")
    Q = q.dense()
    S = Q + Q.T
    np.fill_diagonal(S, 0.0)
    diag = np.diag(Q)
    x = np.zeros(n, dtype=np.int8)
    local = np.zeros(n)
    e, idx = 0.0, 0
    energies = np.empty(1 << n)
    indices = np.empty(1 << n, dtype=np.int64)
    energies[0], indices[0] = 0.0, 0
    for t in range(1, 1 << n):
        bit = (t & -t).bit_length() - 1
        i = n - 1 - bit
        sign = -1 if x[i] else 1
        e += sign * (diag[i] + local[i])
        x[i] ^= 1
        local += sign * S[:, i]
        idx ^= 1 << bit
        energies[t], indices[t] = e, idx
    m = energies.min()
    best = int(indices[energies <= m + tol * max(1.0, abs(m))].min())
    xb = index_to_bits(best, n)
    return SolverResult(xb, q.energy(xb), info={"states": 1 << n})
