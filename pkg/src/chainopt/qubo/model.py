"""Compilation of a reduced supply-chain instance into a scalarised QUBO."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..preprocess import ReducedInstance
from .core import Poly, Qubo, to_ising

FAMILIES = ("5>=", "5<=", "6>=", "6<=")
TERM_NAMES = ("C1", "C2", "C3", "C4", "P1", "P2", "P3", "P4", "P5", "P6")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Weights:
    w: tuple[float, float, float, float]

    def __post_init__(self):
        w = tuple(float(v) for v in self.w)
        if len(w) != 4 or any(not 0 <= v <= 1 for v in w):
            raise ModelError(f"weights must be four values in [0, 1], got {self.w}")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ModelError(f"weights must sum to 1, got {sum(w)}")
        object.__setattr__(self, "w", w)

    def __getitem__(self, n):
        return self.w[n]

    @property
    def wbar(self):
        return self.w[:3]


@dataclass(frozen=True)
class Multipliers:
    lam: tuple[float, float, float, float, float, float] = (2.0,) * 6

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        if len(lam) != 6 or any(not math.isfinite(v) or v < 0 for v in lam):
            raise ModelError(f"multipliers must be six finite non-negative values, got {self.lam}")
        if any(v <= 0 for v in lam[:4]):
            raise ModelError("multipliers 1-4 must be positive")
        object.__setattr__(self, "lam", lam)

    def __getitem__(self, n):
        return self.lam[n]


def rational_approx(values, R: int) -> np.ndarray:
    """Integer numerators P with P/R closest to each value (ties to even)."""
    if R < 1:
        raise ModelError("denominator must be >= 1")
    return np.rint(np.asarray(values, dtype=float) * R).astype(np.int64)


def share_numerators(alphas, Rbar: int) -> np.ndarray:
    """Numerators for the primary shares, kept inside [Rbar/2, Rbar]."""
    P = rational_approx(alphas, Rbar)
    return np.clip(P, math.ceil(Rbar / 2), Rbar)


@dataclass(frozen=True)
class RationalApprox:
    R: int
    Rbar: int
    P: np.ndarray
    Pbar: np.ndarray
    eps: np.ndarray
    eps_bar: np.ndarray

    @classmethod
    def build(cls, values, alphas, R: int = 10, Rbar: int = 5, Pbar=None) -> "RationalApprox":
        values = np.asarray(values, dtype=float)
        alphas = np.asarray(alphas, dtype=float)
        P = rational_approx(values, R)
        if Pbar is None:
            Pb = share_numerators(alphas, Rbar)
        else:
            Pb = np.broadcast_to(np.asarray(Pbar, dtype=np.int64), alphas.shape).copy()
            if np.any(2 * Pb < Rbar) or np.any(Pb > Rbar):
                raise ModelError("share numerators must give shares in [0.5, 1]")
        return cls(int(R), int(Rbar), P, Pb, values - P / R, alphas - Pb / Rbar)

    def dbar(self, i: int, a: int) -> int:
        return int(self.Pbar[i]) if a == 0 else int(self.Rbar - self.Pbar[i])


@dataclass(frozen=True)
class AncillaGroup:
    family: str
    entity: str
    bits: int
    start: int
    bound: int       # K_min*R*Rbar, K_max*R*Rbar, ... for this window
    active: bool = True

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.bits)


def ancilla_bits(upper: int) -> int:
    """ceil(log2(upper + 1)) for a non-negative integer slack bound."""
    if upper < 0:
        raise ModelError(f"ancilla counter needs a non-negative slack bound, got {upper}")
    return int(upper).bit_length()


@dataclass
class VariableLayout:
    parts: tuple[str, ...]
    options: dict[str, tuple[tuple[str, str], ...]]
    aliased: dict[str, bool]
    slots: dict[str, tuple[np.ndarray, np.ndarray]]
    n_y_full: int
    groups: list[AncillaGroup]
    n_full: int
    fixed: dict[int, int] = field(default_factory=dict)

    @cached_property
    def free(self) -> np.ndarray:
        return np.array([i for i in range(self.n_full) if i not in self.fixed], dtype=np.int64)

    @cached_property
    def full_to_free(self) -> np.ndarray:
        m = -np.ones(self.n_full, dtype=np.int64)
        m[self.free] = np.arange(self.free.size)
        return m

    @property
    def N_y(self) -> int:
        return self.n_y_full - len(self.fixed)

    @property
    def N_z(self) -> int:
        return self.n_full - self.n_y_full

    @property
    def N_x(self) -> int:
        return self.free.size

    @cached_property
    def part_index(self) -> dict[str, int]:
        return {p: i for i, p in enumerate(self.parts)}

    def expand(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.N_x:
            raise ModelError(f"expected {self.N_x} variables, got {x.shape[-1]}")
        full = np.zeros(x.shape[:-1] + (self.n_full,), dtype=np.int8)
        full[..., self.free] = x
        for i, v in self.fixed.items():
            full[..., i] = v
        return full

    def contract(self, full) -> np.ndarray:
        return np.asarray(full)[..., self.free].astype(np.int8)

    def one_hot_groups(self) -> list[tuple[str, int, np.ndarray]]:
        """(part, source, free indices) per one-hot constraint; aliased parts yield one group."""
        out = []
        for p in self.parts:
            srcs = (0,) if self.aliased[p] else (0, 1)
            for a in srcs:
                idx = self.full_to_free[self.slots[p][a]]
                idx = idx[idx >= 0]
                if idx.size:
                    out.append((p, a, idx))
        return out

    def ancilla_free_indices(self) -> np.ndarray:
        return self.full_to_free[self.n_y_full:]


@dataclass
class QuboModel:
    qubo: Qubo
    layout: VariableLayout
    weights: Weights
    multipliers: Multipliers
    rational: RationalApprox
    reduced: ReducedInstance
    scales: np.ndarray
    terms: dict[str, Poly]
    prune_vacuous: bool = False

    @property
    def n(self) -> int:
        return self.qubo.n

    @property
    def instance(self):
        return self.reduced.instance

    def energy(self, x) -> float:
        return self.qubo.energy(x)

    def energies(self, X) -> np.ndarray:
        return self.qubo.energies(X)

    @cached_property
    def ising(self):
        return to_ising(self.qubo)

    def routes(self):
        return self.reduced.routes(self.weights.wbar)


# -- layout ------------------------------------------------------------------

def build_layout(reduced: ReducedInstance, rational: RationalApprox, *, fold_forced: bool = True,
                 prune_vacuous: bool = False) -> VariableLayout:
    inst = reduced.instance
    parts = tuple(p.id for p in inst.parts)
    options, aliased, slots = {}, {}, {}
    nxt = 0
    for p in parts:
        opts = reduced.options[p]
        options[p] = opts
        alias = len(reduced.assignable_sites[p]) == 1
        aliased[p] = alias
        a1 = np.arange(nxt, nxt + len(opts))
        nxt += len(opts)
        if alias:
            a2 = a1
        else:
            a2 = np.arange(nxt, nxt + len(opts))
            nxt += len(opts)
        slots[p] = (a1, a2)
    n_y = nxt

    RR = rational.R * rational.Rbar
    # all-ones loads size the slack counters; one-hot loads decide vacuity
    site_all = {s.id: 0 for s in inst.sites}
    sup_all = {u.id: 0 for u in inst.suppliers}
    site_one = dict(site_all)
    sup_one = dict(sup_all)
    for idx, p in enumerate(parts):
        for a in (0, 1):
            d = int(rational.P[idx]) * rational.dbar(idx, a)
            for (k, u) in options[p]:
                site_all[k] += d
                sup_all[u] += d
            for k in {k for k, _ in options[p]}:
                site_one[k] += d
            for u in {u for _, u in options[p]}:
                sup_one[u] += d

    groups = []

    def add(family, entity, slack_bound, bound, vacuous):
        nonlocal nxt
        if prune_vacuous and vacuous:
            groups.append(AncillaGroup(family, entity, 0, nxt, bound, active=False))
            return
        bits = ancilla_bits(slack_bound)
        groups.append(AncillaGroup(family, entity, bits, nxt, bound))
        nxt += bits

    for s in inst.sites:
        if site_all[s.id] - s.ws_min * RR < 0:
            raise ModelError(f"site {s.id!r} can never reach its minimum workshare")
    for u in inst.suppliers:
        if sup_all[u.id] - u.ws_min * RR < 0:
            raise ModelError(f"supplier {u.id!r} can never reach its minimum workshare")
    for s in inst.sites:
        add("5>=", s.id, site_all[s.id] - s.ws_min * RR, s.ws_min * RR, s.ws_min == 0)
    for s in inst.sites:
        add("5<=", s.id, s.ws_max * RR, s.ws_max * RR, s.ws_max * RR >= site_one[s.id])
    for u in inst.suppliers:
        add("6>=", u.id, sup_all[u.id] - u.ws_min * RR, u.ws_min * RR, u.ws_min == 0)
    for u in inst.suppliers:
        add("6<=", u.id, u.ws_max * RR, u.ws_max * RR, u.ws_max * RR >= sup_one[u.id])

    fixed = {}
    if fold_forced:
        for p in parts:
            if len(options[p]) == 1:
                fixed[int(slots[p][0][0])] = 1
    return VariableLayout(parts, options, aliased, slots, n_y, groups, nxt, fixed)


# -- terms -------------------------------------------------------------------

def _alpha_a(alpha: float, a: int) -> float:
    return alpha if a == 0 else 1.0 - alpha


def kpi_terms(reduced: ReducedInstance, layout: VariableLayout, weights: Weights,
              scales=None) -> dict[str, Poly]:
    """Weighted KPI polynomials C1..C4 over the full variable index space."""
    inst = reduced.instance
    d = reduced.scales if scales is None else scales
    n = layout.n_full
    terms = {f"C{k}": Poly(n) for k in range(1, 5)}
    if any(weights[k] for k in range(3)):
        for i, j in inst.edges:
            alpha = inst.part_by_id[i].alpha
            oi, oj = layout.options[i], layout.options[j]
            contrib = np.full((len(oi), len(oj), 3), np.nan)
            for a_idx, (k, _) in enumerate(oi):
                for b_idx, (l, _) in enumerate(oj):
                    c = reduced.route_contribution(weights.wbar, i, k, l)
                    if c is not None:
                        contrib[a_idx, b_idx] = c
            ok = ~np.isnan(contrib[..., 0])
            ra, rb = np.nonzero(ok)
            for nk in range(3):
                if not weights[nk]:
                    continue
                vals = weights[nk] / d[nk] * contrib[ra, rb, nk]
                for a in (0, 1):
                    for b in (0, 1):
                        terms[f"C{nk + 1}"].add_pairs(layout.slots[i][a][ra], layout.slots[j][b][rb],
                                                      _alpha_a(alpha, a) * vals)
    if weights[3]:
        scale = weights[3] / d[3]
        v = inst.relative_values
        for sup in inst.suppliers:
            idx, coef = [], []
            for p in layout.parts:
                alpha = inst.part_by_id[p].alpha
                for o, (_, u) in enumerate(layout.options[p]):
                    if u != sup.id:
                        continue
                    for a in (0, 1):
                        idx.append(layout.slots[p][a][o])
                        coef.append(v[p] * _alpha_a(alpha, a))
            terms["C4"].add_square(idx, coef, -float(sup.ws_target), scale)
    return terms


def penalty_terms(reduced: ReducedInstance, layout: VariableLayout, rational: RationalApprox) -> dict[str, Poly]:
    """Unscaled penalty polynomials P1..P6 over the full variable index space."""
    inst = reduced.instance
    n = layout.n_full
    terms = {f"P{k}": Poly(n) for k in range(1, 7)}

    # P1: pairs of PBS neighbours placed at sites without a connecting route
    for i, j in inst.edges:
        oi, oj = layout.options[i], layout.options[j]
        bad = [(x, y) for x, (k, _) in enumerate(oi) for y, (l, _) in enumerate(oj)
               if not reduced.reachable(i, k, l)]
        if not bad:
            continue
        ra, rb = np.array(bad).T
        for a in (0, 1):
            for b in (0, 1):
                terms["P1"].add_pairs(layout.slots[i][a][ra], layout.slots[j][b][rb], 1.0)

    for p in layout.parts:
        opts = layout.options[p]
        s1, s2 = layout.slots[p]
        # P2: one assignment per (part, source)
        for a in (0, 1):
            terms["P2"].add_square(layout.slots[p][a], 1.0, -1.0)
        # P3 / P4: distinct sites and regions for the two sources
        sites = reduced.assignable_sites[p]
        if len(sites) >= 2:
            for k in sites:
                m = np.array([o for o, (kk, _) in enumerate(opts) if kk == k])
                terms["P3"].add_product(s1[m], 1.0, s2[m], 1.0)
        regions = reduced.assignable_regions[p]
        if len(regions) >= 2:
            reg_of = inst.site_by_id
            for r in regions:
                m = np.array([o for o, (kk, _) in enumerate(opts) if reg_of[kk].region == r])
                terms["P4"].add_product(s1[m], 1.0, s2[m], 1.0)

    # P5 / P6: workshare windows through binary-expanded slack
    loads: dict[tuple[str, str], tuple[list, list]] = {}
    for idx, p in enumerate(layout.parts):
        for a in (0, 1):
            unit = int(rational.P[idx]) * rational.dbar(idx, a)
            for o, (k, u) in enumerate(layout.options[p]):
                var = int(layout.slots[p][a][o])
                for key in (("5", k), ("6", u)):
                    ix, cf = loads.setdefault(key, ([], []))
                    ix.append(var)
                    cf.append(unit)
    for g in layout.groups:
        if not g.active:
            continue
        fam, sense = g.family[0], g.family[1:]
        ix, cf = loads.get((fam, g.entity), ([], []))
        ix = np.array(ix, dtype=np.int64)
        cf = np.array(cf, dtype=float)
        bits = g.indices
        weights_z = -(2.0 ** np.arange(g.bits))
        if sense == ">=":
            idx = np.concatenate([ix, bits])
            coef = np.concatenate([cf, weights_z])
            c0 = -float(g.bound)
        else:
            idx = np.concatenate([ix, bits])
            coef = np.concatenate([-cf, weights_z])
            c0 = float(g.bound)
        terms[f"P{fam}"].add_square(idx, coef, c0, 2.0 ** (-g.bits))
    return terms


def compile_model(reduced: ReducedInstance, weights, multipliers=None, *, R: int = 10, Rbar: int = 5,
                  Pbar=None, fold_forced: bool = True, prune_vacuous: bool = False) -> QuboModel:
    """Assemble Q(x) = sum_n Cbar_n + sum_n lambda_n P_n as an upper-triangular QUBO."""
    if not isinstance(weights, Weights):
        weights = Weights(tuple(weights))
    if multipliers is None:
        multipliers = Multipliers()
    elif not isinstance(multipliers, Multipliers):
        multipliers = Multipliers(tuple(multipliers))
    inst = reduced.instance
    v = inst.relative_values
    rational = RationalApprox.build([v[p.id] for p in inst.parts], [p.alpha for p in inst.parts],
                                    R, Rbar, Pbar)
    layout = build_layout(reduced, rational, fold_forced=fold_forced, prune_vacuous=prune_vacuous)
    terms = kpi_terms(reduced, layout, weights)
    terms.update(penalty_terms(reduced, layout, rational))

    total = Poly(layout.n_full)
    for name in TERM_NAMES[:4]:
        total.add_poly(terms[name])
    for n_, name in enumerate(TERM_NAMES[4:]):
        if multipliers[n_]:
            total.add_poly(terms[name], multipliers[n_])
    qubo = _fold(total, layout)
    return QuboModel(qubo, layout, weights, multipliers, rational, reduced, reduced.scales, terms,
                     prune_vacuous)


def _fold(poly: Poly, layout: VariableLayout) -> Qubo:
    """Clamp the fixed variables of ``layout`` and re-index onto the free ones."""
    fmap = layout.full_to_free
    fixed_val = np.zeros(layout.n_full)
    for i, val in layout.fixed.items():
        fixed_val[i] = val
    const = poly.const + float(poly.lin @ fixed_val)
    lin_free = np.zeros(layout.N_x)
    keep = fmap >= 0
    lin_free[fmap[keep]] += poly.lin[keep]
    r, c, v = poly.pairs()
    fr, fc = fmap[r], fmap[c]
    both = (fr >= 0) & (fc >= 0)
    only_r = (fr >= 0) & (fc < 0)
    only_c = (fr < 0) & (fc >= 0)
    none = (fr < 0) & (fc < 0)
    const += float(np.sum(v[none] * fixed_val[r[none]] * fixed_val[c[none]]))
    np.add.at(lin_free, fr[only_r], v[only_r] * fixed_val[c[only_r]])
    np.add.at(lin_free, fc[only_c], v[only_c] * fixed_val[r[only_c]])
    return Qubo.from_terms(layout.N_x, const, lin_free, fr[both], fc[both], v[both])
