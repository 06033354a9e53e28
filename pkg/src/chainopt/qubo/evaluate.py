"""Direct evaluation of the model terms and ancilla completion.

Nothing here reads the assembled matrix: every term is recomputed from the
instance data and the variable layout, which makes it an independent check of
the compiled polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import QuboModel


@dataclass(frozen=True)
class Evaluation:
    objective: float
    kpis: np.ndarray          # C_n / d_n, independent of the weights
    weighted: np.ndarray      # w_n C_n / d_n
    penalties: np.ndarray     # P1..P6 (unscaled by lambda)
    feasible: bool

    def as_dict(self) -> dict:
        out = {"objective": self.objective, "feasible": self.feasible}
        out.update({f"C{n + 1}": float(v) for n, v in enumerate(self.kpis)})
        out.update({f"P{n + 1}": float(v) for n, v in enumerate(self.penalties)})
        return out


@dataclass(frozen=True)
class WindowViolation:
    family: str
    entity: str
    slack: int

    def __str__(self):
        kind = "minimum" if self.family.endswith(">=") else "maximum"
        what = "site" if self.family.startswith("5") else "supplier"
        return f"{what} {self.entity!r} violates its {kind} workshare (slack {self.slack})"


@dataclass(frozen=True)
class FillResult:
    x: np.ndarray
    violations: tuple[WindowViolation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


def _edge_tables(model: QuboModel):
    # per PBS edge: route contributions (n_opts_i, n_opts_j, 3) and an unreachable mask
    cached = model.__dict__.get("_edge_tables")
    if cached is not None:
        return cached
    red, lay, wbar = model.reduced, model.layout, model.weights.wbar
    tables = []
    for i, j in model.instance.edges:
        oi, oj = lay.options[i], lay.options[j]
        c = np.zeros((len(oi), len(oj), 3))
        bad = np.zeros((len(oi), len(oj)), dtype=bool)
        for a, (k, _) in enumerate(oi):
            for b, (l, _) in enumerate(oj):
                r = red.route_contribution(wbar, i, k, l)
                if r is None:
                    bad[a, b] = True
                else:
                    c[a, b] = r
        tables.append((i, j, c, bad))
    model.__dict__["_edge_tables"] = tables
    return tables


def _units(model: QuboModel, part: str, a: int) -> int:
    idx = model.layout.part_index[part]
    return int(model.rational.P[idx]) * model.rational.dbar(idx, a)


def workshare_units(model: QuboModel, full) -> tuple[dict[str, int], dict[str, int]]:
    """Integer workshare p_5 (per site) and p_6 (per supplier) of a full variable vector."""
    lay, inst = model.layout, model.instance
    site = {s.id: 0 for s in inst.sites}
    sup = {u.id: 0 for u in inst.suppliers}
    for p in lay.parts:
        for a in (0, 1):
            unit = _units(model, p, a)
            for o in np.flatnonzero(full[lay.slots[p][a]]):
                k, u = lay.options[p][o]
                site[k] += unit
                sup[u] += unit
    return site, sup


def evaluate_full(model: QuboModel, full) -> Evaluation:
    full = np.asarray(full, dtype=np.int64)
    lay, inst, red = model.layout, model.instance, model.reduced
    y = {p: (full[lay.slots[p][0]], full[lay.slots[p][1]]) for p in lay.parts}
    alpha = {p.id: p.alpha for p in inst.parts}
    share = lambda p, a: alpha[p] if a == 0 else 1.0 - alpha[p]  # noqa: E731

    C = np.zeros(4)
    P = np.zeros(6)
    for i, j, c, bad in _edge_tables(model):
        for a in (0, 1):
            for b in (0, 1):
                yi, yj = y[i][a], y[j][b]
                C[:3] += share(i, a) * np.einsum("a,abn,b->n", yi, c, yj)
                P[0] += float(yi @ bad @ yj)

    v = inst.relative_values
    for sup in inst.suppliers:
        s = 0.0
        for p in lay.parts:
            for a in (0, 1):
                for o in np.flatnonzero(y[p][a]):
                    if lay.options[p][o][1] == sup.id:
                        s += v[p] * share(p, a)
        C[3] += (s - sup.ws_target) ** 2

    site_of = inst.site_by_id
    for p in lay.parts:
        y1, y2 = y[p]
        P[1] += (int(y1.sum()) - 1) ** 2 + (int(y2.sum()) - 1) ** 2
        sites = [k for k, _ in lay.options[p]]
        if len(red.assignable_sites[p]) >= 2:
            for k in red.assignable_sites[p]:
                m = np.array([s == k for s in sites])
                P[2] += int(y1[m].sum()) * int(y2[m].sum())
        if len(red.assignable_regions[p]) >= 2:
            for r in red.assignable_regions[p]:
                m = np.array([site_of[s].region == r for s in sites])
                P[3] += int(y1[m].sum()) * int(y2[m].sum())

    site_load, sup_load = workshare_units(model, full)
    for g in lay.groups:
        if not g.active:
            continue
        load = (site_load if g.family[0] == "5" else sup_load)[g.entity]
        z = int(full[g.indices] @ (1 << np.arange(g.bits))) if g.bits else 0
        resid = (load - g.bound if g.family.endswith(">=") else g.bound - load) - z
        P[4 if g.family[0] == "5" else 5] += resid * resid / 2.0 ** g.bits

    kpis = C / model.scales
    w = np.array(model.weights.w)
    lam = np.array(model.multipliers.lam)
    weighted = w * kpis
    objective = float(weighted.sum() + lam @ P)
    return Evaluation(objective, kpis, weighted, P, bool(not P.any()))


def evaluate(model: QuboModel, x) -> Evaluation:
    """Objective, d-scaled KPIs C1..C4, penalties P1..P6 and feasibility of ``x``."""
    return evaluate_full(model, model.layout.expand(x))


def ancilla_fill(model: QuboModel, x) -> FillResult:
    """Set every ancilla group to the binary expansion of its window slack.

    A window whose slack is negative (or would not fit the group's bits) is
    reported as a violation; its bits are then left at zero.
    """
    lay = model.layout
    full = lay.expand(x).astype(np.int8)
    full[lay.n_y_full:] = 0
    site_load, sup_load = workshare_units(model, full)
    bad = []
    for g in lay.groups:
        load = (site_load if g.family[0] == "5" else sup_load)[g.entity]
        slack = load - g.bound if g.family.endswith(">=") else g.bound - load
        if not g.active:
            if slack < 0:
                bad.append(WindowViolation(g.family, g.entity, slack))
            continue
        if slack < 0 or slack >= 1 << g.bits:
            bad.append(WindowViolation(g.family, g.entity, slack))
            continue
        full[g.indices] = (slack >> np.arange(g.bits)) & 1
    return FillResult(lay.contract(full), tuple(bad))
