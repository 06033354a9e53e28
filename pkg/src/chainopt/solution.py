"""Assignments, decoded solutions and an independent feasibility checker."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .preprocess import ReducedInstance
from .qubo import QuboModel, ancilla_fill, evaluate

Option = tuple[str, str]


class Assignment:
    """Mutable (part, source) -> option-index map with running workshare totals.

    Loads are integer workshare units (P_i times the share numerator).  A part
    that cannot be double-sourced stores only its primary slot; the secondary
    mirrors it and the primary carries the whole P_i * Rbar units.
    """

    def __init__(self, model: QuboModel):
        self.model = model
        lay = model.layout
        self.choice: dict[str, list[int | None]] = {p: [None, None] for p in lay.parts}
        self.site_load = {s.id: 0 for s in model.instance.sites}
        self.sup_load = {u.id: 0 for u in model.instance.suppliers}
        rat = model.rational
        self._units = {}
        for i, p in enumerate(lay.parts):
            if lay.aliased[p]:
                self._units[p] = (int(rat.P[i]) * rat.Rbar, 0)
            else:
                self._units[p] = (int(rat.P[i]) * rat.dbar(i, 0), int(rat.P[i]) * rat.dbar(i, 1))

    # basic state ------------------------------------------------------------
    def copy(self) -> "Assignment":
        new = Assignment.__new__(Assignment)
        new.model = self.model
        new.choice = {p: list(c) for p, c in self.choice.items()}
        new.site_load = dict(self.site_load)
        new.sup_load = dict(self.sup_load)
        new._units = self._units
        return new

    def sources(self, part: str) -> tuple[int, ...]:
        return (0,) if self.model.layout.aliased[part] else (0, 1)

    def slots(self):
        for p in self.model.layout.parts:
            for a in self.sources(p):
                yield p, a

    def unit(self, part: str, a: int) -> int:
        return self._units[part][a]

    def option(self, part: str, a: int) -> Option | None:
        if self.model.layout.aliased[part]:
            a = 0
        o = self.choice[part][a]
        return None if o is None else self.model.layout.options[part][o]

    def assign(self, part: str, a: int, o: int) -> None:
        if self.choice[part][a] is not None:
            self.unassign(part, a)
        k, u = self.model.layout.options[part][o]
        self.choice[part][a] = o
        self.site_load[k] += self.unit(part, a)
        self.sup_load[u] += self.unit(part, a)

    def unassign(self, part: str, a: int) -> None:
        o = self.choice[part][a]
        if o is None:
            return
        k, u = self.model.layout.options[part][o]
        self.site_load[k] -= self.unit(part, a)
        self.sup_load[u] -= self.unit(part, a)
        self.choice[part][a] = None

    def unassigned(self) -> list[tuple[str, int]]:
        return [(p, a) for p, a in self.slots() if self.choice[p][a] is None]

    def is_complete(self) -> bool:
        return not self.unassigned()

    def as_mapping(self) -> dict[str, tuple[Option | None, Option | None]]:
        return {p: (self.option(p, 0), self.option(p, 1)) for p in self.model.layout.parts}

    # windows ----------------------------------------------------------------
    def _bounds(self):
        rr = self.model.rational.R * self.model.rational.Rbar
        inst = self.model.instance
        cache = self.__dict__.get("_bcache")
        if cache is None:
            cache = ({s.id: (s.ws_min * rr, s.ws_max * rr) for s in inst.sites},
                     {u.id: (u.ws_min * rr, u.ws_max * rr) for u in inst.suppliers})
            self._bcache = cache
        return cache

    def fits(self, site: str, supplier: str, units: int) -> bool:
        sb, ub = self._bounds()
        return (self.site_load[site] + units <= sb[site][1]
                and self.sup_load[supplier] + units <= ub[supplier][1])

    def over_capacity(self) -> list[tuple[str, str]]:
        sb, ub = self._bounds()
        return ([("site", k) for k, v in self.site_load.items() if v > sb[k][1]]
                + [("supplier", u) for u, v in self.sup_load.items() if v > ub[u][1]])

    def under_minimum(self) -> list[tuple[str, str]]:
        sb, ub = self._bounds()
        return ([("site", k) for k, v in self.site_load.items() if v < sb[k][0]]
                + [("supplier", u) for u, v in self.sup_load.items() if v < ub[u][0]])

    # vectors ----------------------------------------------------------------
    def to_full(self) -> np.ndarray:
        lay = self.model.layout
        full = np.zeros(lay.n_full, dtype=np.int8)
        for p in lay.parts:
            for a in (0, 1):
                o = self.choice[p][0 if lay.aliased[p] else a]
                if o is not None:
                    full[lay.slots[p][a][o]] = 1
        return full

    def to_x(self) -> np.ndarray:
        """Free-variable vector with ancillas completed where the windows allow it."""
        return ancilla_fill(self.model, self.model.layout.contract(self.to_full())).x

    @classmethod
    def from_x(cls, model: QuboModel, x) -> "Assignment":
        """Decode ``x``; a one-hot group with zero or several ones stays unassigned."""
        lay = model.layout
        full = lay.expand(x)
        out = cls(model)
        for p in lay.parts:
            for a in out.sources(p):
                ones = np.flatnonzero(full[lay.slots[p][a]])
                if ones.size == 1:
                    out.assign(p, a, int(ones[0]))
        return out

    @classmethod
    def from_mapping(cls, model: QuboModel, mapping) -> "Assignment":
        out = cls(model)
        for p, pair in mapping.items():
            for a in out.sources(p):
                if pair[a] is not None:
                    out.assign(p, a, model.layout.options[p].index(tuple(pair[a])))
        return out


@dataclass
class Solution:
    x: np.ndarray
    objective: float
    kpis: np.ndarray
    penalties: np.ndarray
    feasible: bool
    assignment: dict = field(repr=False)
    info: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_x(cls, model: QuboModel, x, **info) -> "Solution":
        x = np.asarray(x, dtype=np.int8)
        ev = evaluate(model, x)
        mapping = Assignment.from_x(model, x).as_mapping()
        return cls(x.copy(), model.energy(x), ev.kpis, ev.penalties, ev.feasible, mapping, dict(info))

    @classmethod
    def from_assignment(cls, a: Assignment, **info) -> "Solution":
        return cls.from_x(a.model, a.to_x(), **info)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "feasible": self.feasible,
            "kpis": {f"C{n + 1}": float(v) for n, v in enumerate(self.kpis)},
            "penalties": {f"P{n + 1}": float(v) for n, v in enumerate(self.penalties)},
            "assignment": {p: [None if o is None else list(o) for o in pair]
                           for p, pair in self.assignment.items()},
            "x": "".join(map(str, self.x.tolist())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def check_assignment(reduced: ReducedInstance, mapping, R: int = 10, Rbar: int = 5,
                     Pbar=None) -> list[str]:
    """Violations of a (part -> (primary, secondary)) map, read straight off the instance.

    Workshare windows are checked in the integer units used by the model:
    ``round(v_i R) * share numerator`` against ``K_min R Rbar`` and ``K_max R Rbar``.
    """
    inst = reduced.instance
    problems = []
    rel = inst.relative_values
    site_load = {s.id: 0 for s in inst.sites}
    sup_load = {u.id: 0 for u in inst.suppliers}
    placed = {}
    for part in inst.parts:
        p = part.id
        pair = mapping.get(p, (None, None))
        if pair[0] is None or pair[1] is None:
            problems.append(f"part {p} is not fully assigned")
            continue
        prim, sec = tuple(pair[0]), tuple(pair[1])
        for opt in (prim, sec):
            if opt not in reduced.options[p]:
                problems.append(f"part {p}: option {opt} is not in its reduced set")
        sites = reduced.assignable_sites[p]
        if len(sites) == 1:
            if prim != sec:
                problems.append(f"part {p} has one site but two different options")
        else:
            if prim[0] == sec[0]:
                problems.append(f"part {p} uses site {prim[0]} for both sources")
            regions = reduced.assignable_regions[p]
            reg = inst.site_by_id
            if len(regions) >= 2 and reg[prim[0]].region == reg[sec[0]].region:
                problems.append(f"part {p} uses region {reg[prim[0]].region} for both sources")
        placed[p] = (prim, sec)
        units_total = int(np.rint(rel[p] * R))
        pb = int(np.clip(np.rint(part.alpha * Rbar), -(-Rbar // 2), Rbar)) if Pbar is None else int(Pbar)
        if len(sites) == 1:
            shares = [(prim, units_total * Rbar)]
        else:
            shares = [(prim, units_total * pb), (sec, units_total * (Rbar - pb))]
        for (k, u), units in shares:
            site_load[k] += units
            sup_load[u] += units
    for child, parent in inst.edges:
        if child not in placed or parent not in placed:
            continue
        for k, _ in placed[child]:
            for l, _ in placed[parent]:
                if not reduced.reachable(child, k, l):
                    problems.append(f"part {child} cannot be moved from {k} to {l} for parent {parent}")
    rr = R * Rbar
    for s in inst.sites:
        if not s.ws_min * rr <= site_load[s.id] <= s.ws_max * rr:
            problems.append(f"site {s.id} workshare {site_load[s.id] / rr:g} outside [{s.ws_min}, {s.ws_max}]")
    for u in inst.suppliers:
        if not u.ws_min * rr <= sup_load[u.id] <= u.ws_max * rr:
            problems.append(f"supplier {u.id} workshare {sup_load[u.id] / rr:g} outside [{u.ws_min}, {u.ws_max}]")
    return problems
