"""Dynamic anisotropic smoothing (DAS): derivative-free online hyperparameter tuning.

A Gaussian cloud with centre ``theta`` and shape ``L`` (covariance ``L L^T``) is
sampled antithetically.  The observed costs become a centred softmin signal,
and Euler steps of the smoothed flow move ``theta`` along the
``L``-preconditioned descent estimate and reshape ``L`` with the matching
curvature estimate.  Positive parameters can live in log space.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ParamSpec:
    name: str
    lo: float
    hi: float
    log: bool = False

    def to_internal(self, v: float) -> float:
        return float(np.log(v)) if self.log else float(v)

    def to_external(self, v: float) -> float:
        return float(np.exp(v)) if self.log else float(v)

    @property
    def bounds(self) -> tuple[float, float]:
        return (np.log(self.lo), np.log(self.hi)) if self.log else (self.lo, self.hi)


@dataclass(frozen=True)
class DasState:
    specs: tuple[ParamSpec, ...]
    theta: np.ndarray
    L: np.ndarray
    alpha_theta: float = 0.5
    alpha_L: float = 0.1
    lam: float = 0.0
    eta_theta: float = 0.0
    eta_L: float = 0.0
    R: int = 8
    seed: int = 0
    step: int = 0
    stalled: bool = False

    def __post_init__(self):
        if self.R < 2:
            raise ValueError("DAS needs at least two samples per step")
        d = len(self.specs)
        if self.theta.shape != (d,) or self.L.shape != (d, d):
            raise ValueError("theta / L shapes do not match the parameter list")

    @classmethod
    def create(cls, specs, start: dict, spread=0.3, **kw) -> "DasState":
        """Start at ``start`` (external values) with a diagonal shape of ``spread`` per coordinate."""
        specs = tuple(specs)
        theta = np.array([s.to_internal(start[s.name]) for s in specs])
        spread = np.broadcast_to(np.asarray(spread, dtype=float), theta.shape)
        return cls(specs, theta, np.diag(spread).astype(float), **kw)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    def values(self, internal=None) -> dict[str, float]:
        v = self.theta if internal is None else internal
        return {s.name: s.to_external(x) for s, x in zip(self.specs, v)}

    def clamp(self, internal: np.ndarray) -> np.ndarray:
        lo = np.array([s.bounds[0] for s in self.specs])
        hi = np.array([s.bounds[1] for s in self.specs])
        return np.clip(internal, lo, hi)


@dataclass(frozen=True)
class DasBatch:
    eps: np.ndarray          # (R, d) standard-normal directions
    internal: np.ndarray     # (R, d) clamped samples in internal coordinates
    values: list[dict] = field(default_factory=list)


def das_sample(state: DasState) -> DasBatch:
    """R samples theta + L eps with antithetic pairs, clamped to the valid ranges."""
    rng = np.random.default_rng([state.seed, state.step, 0])
    d = state.theta.size
    half = rng.standard_normal(((state.R + 1) // 2, d))
    eps = np.concatenate([half, -half])[: state.R]
    internal = state.clamp(state.theta + eps @ state.L.T)
    return DasBatch(eps, internal, [state.values(row) for row in internal])


def softmin_signal(costs: np.ndarray) -> np.ndarray:
    """Zero-mean signal, negative for samples carrying more than average softmin weight."""
    spread = costs.std()
    if not np.isfinite(spread) or spread == 0:
        return np.zeros_like(costs)
    z = -(costs - costs.min()) / spread
    w = np.exp(z - z.max())
    w /= w.sum()
    return 1.0 - costs.size * w


def _refactor(L: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    S = L @ L.T
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    S = (vecs * np.maximum(vals, floor)) @ vecs.T
    return np.linalg.cholesky(0.5 * (S + S.T))


def das_update(state: DasState, batch: DasBatch, costs) -> DasState:
    """One Euler step of the smoothed flow from the costs observed for ``batch``."""
    costs = np.asarray(costs, dtype=float)
    keep = np.isfinite(costs)
    if not keep.any():
        warnings.warn("all DAS costs were non-finite; state left unchanged", RuntimeWarning, stacklevel=2)
        return replace(state, step=state.step + 1, stalled=True)
    eps, c = batch.eps[keep], costs[keep]
    sig = softmin_signal(c)
    d = state.theta.size
    rng = np.random.default_rng([state.seed, state.step, 1])
    grad = (sig[:, None] * eps).mean(axis=0)
    curv = np.einsum("r,ri,rj->ij", sig, eps, eps) / sig.size - sig.mean() * np.eye(d)
    theta = state.theta - state.alpha_theta * state.L @ grad
    if state.eta_theta:
        theta = theta + state.eta_theta * rng.standard_normal(d)
    L = state.L + state.alpha_L * (-state.L @ curv + state.lam * state.L)
    if state.eta_L:
        L = L + state.eta_L * rng.standard_normal((d, d))
    return replace(state, theta=state.clamp(theta), L=_refactor(L), step=state.step + 1, stalled=False)


def tune(state: DasState, cost_fn, steps: int, trace: list | None = None) -> DasState:
    """Drive ``cost_fn(values_dict) -> float`` for ``steps`` DAS iterations."""
    for _ in range(steps):
        batch = das_sample(state)
        costs = np.array([cost_fn(v) for v in batch.values])
        state = das_update(state, batch, costs)
        if trace is not None:
            trace.append((state.step, *state.values().values(), float(np.nanmean(costs)),
                          float(np.nanmin(costs))))
    return state


def trace_csv(names, trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", *names, "mean_cost", "best_cost"])
    for row in trace:
        w.writerow([row[0], *(repr(float(v)) for v in row[1:])])
    return buf.getvalue()
