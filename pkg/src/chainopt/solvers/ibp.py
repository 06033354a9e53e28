"""Iterative belief propagation on randomly drawn tree subgraphs of a QUBO.

Each sweep grows an induced tree of the interaction graph, clamps every other
variable to its current value, runs sum-product to convergence on the tree and
redraws the tree variables exactly from the resulting Boltzmann conditional.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..qubo.core import Qubo
from .base import SolverResult


class NumericGuardError(FloatingPointError):
    pass


@dataclass(frozen=True)
class IbpParams:
    beta: float | tuple[float, float] = 5.0   # constant, or (start, end) geometric ramp
    sweeps: int = 50
    damping: float = 0.1
    tree_size: int | None = None              # None: no budget beyond the graph itself
    max_passes: int = 200
    tol: float = 1e-12

    def __post_init__(self):
        betas = self.beta if isinstance(self.beta, tuple) else (self.beta,)
        if any(not b > 0 for b in betas):
            raise ValueError("beta must be positive")
        if not 0 <= self.damping < 1:
            raise ValueError("damping must lie in [0, 1)")
        if self.sweeps < 0:
            raise ValueError("sweeps must be >= 0")

    def schedule(self) -> np.ndarray:
        if not isinstance(self.beta, tuple):
            return np.full(self.sweeps, float(self.beta))
        b0, b1 = self.beta
        return b0 * (b1 / b0) ** (np.arange(self.sweeps) / max(self.sweeps - 1, 1))


def sample_tree(adjacency, rng, budget: int | None = None) -> tuple[list[int], dict[int, int]]:
    """Random induced tree: BFS from a random root adding a node only if exactly one
    of its neighbours is already in the tree.  Returns BFS order and parent links."""
    n = len(adjacency)
    root = int(rng.integers(n))
    budget = n if budget is None else max(1, budget)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[root] = True
    order, parent = [root], {root: -1}
    queue = deque([root])
    while queue and len(order) < budget:
        u = queue.popleft()
        nbrs = adjacency[u]
        for v in rng.permutation(nbrs):
            v = int(v)
            if in_tree[v] or np.count_nonzero(in_tree[adjacency[v]]) != 1:
                continue
            in_tree[v] = True
            parent[v] = u
            order.append(v)
            queue.append(v)
            if len(order) >= budget:
                break
    return order, parent


def _softplus(v: float) -> float:
    return max(v, 0.0) + math.log1p(math.exp(-abs(v)))


def _log_sigmoid(v: float) -> float:
    return -_softplus(-v)


def _lse(a: float, b: float) -> float:
    m = max(a, b)
    return m + math.log1p(math.exp(min(a, b) - m)) if m > -math.inf else m


class TreeBP:
    """Sum-product on an induced tree with clamped boundary.

    A binary message is normalised, so it is carried as one log-odds value
    ``r = log mu(1) - log mu(0)``; ``probabilities`` recovers (mu(0), mu(1)).
    """

    def __init__(self, S: np.ndarray, diag: np.ndarray, order, parent, x, beta: float):
        """``S`` holds the symmetric pair coefficients (zero diagonal), ``diag`` the linear ones."""
        self.order, self.parent = order, parent
        self.children = {v: [] for v in order}
        for v in order[1:]:
            self.children[parent[v]].append(v)
        nodes = np.array(order)
        mask = np.zeros(len(x), dtype=bool)
        mask[nodes] = True
        ext = S[nodes][:, ~mask] @ np.asarray(x, dtype=float)[~mask]
        lin = diag[nodes] + ext
        self.unary = {v: float(-beta * lin[t]) for t, v in enumerate(order)}
        self.pair = {v: float(-beta * S[v, parent[v]]) for v in order[1:]}
        self.up = dict.fromkeys(order[1:], 0.0)      # v -> parent
        self.down = dict.fromkeys(order[1:], 0.0)    # parent -> v

    @staticmethod
    def _msg(belief: float, w: float) -> float:
        return _softplus(belief + w) - _softplus(belief)

    @staticmethod
    def _blend(old: float, new: float, damping: float) -> float:
        if damping == 0:
            return new
        a, b = math.log1p(-damping), math.log(damping)
        return (_lse(a + _log_sigmoid(new), b + _log_sigmoid(old))
                - _lse(a + _log_sigmoid(-new), b + _log_sigmoid(-old)))

    def _belief(self, v: int, skip: int | None = None) -> float:
        b = self.unary[v] + sum(self.up[c] for c in self.children[v] if c != skip)
        return b

    def run(self, damping: float = 0.1, max_passes: int = 200, tol: float = 1e-12) -> int:
        """Upward then downward passes until no message probability moves by more than ``tol``."""
        sig = lambda r: math.exp(_log_sigmoid(r))  # noqa: E731
        for sweep in range(1, max_passes + 1):
            change = 0.0
            for v in reversed(self.order[1:]):
                new = self._blend(self.up[v], self._msg(self._belief(v), self.pair[v]), damping)
                change = max(change, abs(sig(new) - sig(self.up[v])))
                self.up[v] = new
            for v in self.order[1:]:
                p = self.parent[v]
                b = self._belief(p, skip=v) + (self.down[p] if self.parent[p] != -1 else 0.0)
                new = self._blend(self.down[v], self._msg(b, self.pair[v]), damping)
                change = max(change, abs(sig(new) - sig(self.down[v])))
                self.down[v] = new
            if not all(math.isfinite(r) for r in self.up.values()):
                raise NumericGuardError("non-finite belief-propagation message")
            if change <= tol:
                return sweep
        return max_passes

    @staticmethod
    def probabilities(r: float) -> np.ndarray:
        return np.array([math.exp(_log_sigmoid(-r)), math.exp(_log_sigmoid(r))])

    def messages(self) -> dict:
        return ({("up", v): self.probabilities(r) for v, r in self.up.items()}
                | {("down", v): self.probabilities(r) for v, r in self.down.items()})

    def marginals(self) -> dict[int, np.ndarray]:
        out = {}
        for v in self.order:
            b = self._belief(v) + (self.down[v] if self.parent[v] != -1 else 0.0)
            out[v] = self.probabilities(b)
        return out

    def sample(self, rng) -> dict[int, int]:
        """Exact draw from the tree distribution: root marginal, then child conditionals."""
        vals = {}
        for v in self.order:
            b = self._belief(v)
            if self.parent[v] != -1:
                b += self.pair[v] * vals[self.parent[v]]
            vals[v] = int(rng.random() < math.exp(_log_sigmoid(b)))
        return vals


def ibp_solve(qubo: Qubo, params: IbpParams = IbpParams(), x0=None, rng=None) -> SolverResult:
    rng = np.random.default_rng(rng)
    n = qubo.n
    x = rng.integers(0, 2, n).astype(np.int8) if x0 is None else np.array(x0, dtype=np.int8)
    Q = qubo.dense()
    S = Q + Q.T
    np.fill_diagonal(S, 0.0)
    diag = np.diag(Q).copy()
    adj = qubo.adjacency()
    e = qubo.energy(x)
    best_e, best_x = e, x.copy()
    trace = []
    for t, beta in enumerate(params.schedule()):
        order, parent = sample_tree(adj, rng, params.tree_size)
        bp = TreeBP(S, diag, order, parent, x, beta)
        bp.run(params.damping, params.max_passes, params.tol)
        for v, val in bp.sample(rng).items():
            x[v] = val
        e = qubo.energy(x)
        if e < best_e - 1e-12:
            best_e, best_x = e, x.copy()
        trace.append((t + 1, e, best_e))
    return SolverResult(best_x, qubo.energy(best_x), trace, {})
