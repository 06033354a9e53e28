"""Structure-aware heuristics: randomized generation, repair and local improvement."""

from __future__ import annotations

import numpy as np

from .qubo import QuboModel, ancilla_fill
from .solution import Assignment, Solution


class GenerationFailure(RuntimeError):
    """No feasible assignment found within the restart budget."""


def _region(model: QuboModel, site: str) -> str:
    return model.instance.site_by_id[site].region


def feasible_options(model: QuboModel, state: Assignment, part: str, a: int) -> list[int]:
    """Option indices for slot (part, a) that keep every hard constraint satisfied so far.

    Checks reduced-set membership (implicit), site and region distinctness against
    the other source, route existence to the assigned parent and from the assigned
    children, and remaining headroom under the maximum workshares.
    """
    lay, red = model.layout, model.reduced
    inst = model.instance
    other = None if lay.aliased[part] else state.option(part, 1 - a)
    distinct_regions = len(red.assignable_regions[part]) >= 2
    parent = inst.part_by_id[part].parent
    parent_sites = [] if parent is None else [o[0] for o in (state.option(parent, 0), state.option(parent, 1))
                                               if o is not None]
    child_sites = [(c, o[0]) for c in inst.children[part]
                   for o in (state.option(c, 0), state.option(c, 1)) if o is not None]
    units = state.unit(part, a)
    current = state.choice[part][a]
    out = []
    for o, (k, u) in enumerate(lay.options[part]):
        if other is not None:
            if k == other[0]:
                continue
            if distinct_regions and _region(model, k) == _region(model, other[0]):
                continue
        if any(not red.reachable(part, k, l) for l in parent_sites):
            continue
        if any(not red.reachable(c, l, k) for c, l in child_sites):
            continue
        if current is not None:
            ck, cu = lay.options[part][current]
            extra_k = units if ck != k else 0
            extra_u = units if cu != u else 0
            if not (state.site_load[k] + extra_k <= state._bounds()[0][k][1]
                    and state.sup_load[u] + extra_u <= state._bounds()[1][u][1]):
                continue
        elif not state.fits(k, u, units):
            continue
        out.append(o)
    return out


def _level_order(model: QuboModel, rng, deepest_first: bool) -> list[str]:
    levels = model.instance.levels
    parts = list(model.layout.parts)
    keys = rng.permutation(len(parts))
    sign = -1 if deepest_first else 1
    order = sorted(range(len(parts)), key=lambda t: (sign * levels[parts[t]], keys[t]))
    return [parts[t] for t in order]


def _finish(model: QuboModel, state: Assignment, **info) -> Solution | None:
    fill = ancilla_fill(model, model.layout.contract(state.to_full()))
    if not fill.ok:
        return None
    sol = Solution.from_x(model, fill.x, **info)
    return sol if sol.feasible else None


def isg(model: QuboModel, rng=None, max_restarts: int = 100) -> Solution:
    """Random feasible solution, built root first and restarted on dead ends."""
    rng = np.random.default_rng(rng)
    for attempt in range(max_restarts + 1):
        state = Assignment(model)
        dead = False
        for part in _level_order(model, rng, deepest_first=False):
            for a in state.sources(part):
                opts = feasible_options(model, state, part, a)
                if not opts:
                    dead = True
                    break
                state.assign(part, a, int(rng.choice(opts)))
            if dead:
                break
        if dead or state.under_minimum():
            continue
        sol = _finish(model, state, attempts=attempt + 1)
        if sol is not None:
            return sol
    raise GenerationFailure(f"no feasible assignment after {max_restarts + 1} attempts")


def _wrongful(model: QuboModel, state: Assignment) -> set[tuple[str, int]]:
    # slots breaking a route to their parent or clashing with the primary
    red, lay, inst = model.reduced, model.layout, model.instance
    bad = set()
    for part in lay.parts:
        parent = inst.part_by_id[part].parent
        for a in state.sources(part):
            opt = state.option(part, a)
            if opt is None:
                continue
            if parent is not None:
                for b in (0, 1):
                    po = state.option(parent, b)
                    if po is not None and not red.reachable(part, opt[0], po[0]):
                        bad.add((part, a))
        if not lay.aliased[part]:
            o1, o2 = state.option(part, 0), state.option(part, 1)
            if o1 is not None and o2 is not None:
                if o1[0] == o2[0] or (len(red.assignable_regions[part]) >= 2
                                      and _region(model, o1[0]) == _region(model, o2[0])):
                    bad.add((part, 1))
    return bad


def _entity_slots(state: Assignment, kind: str, entity: str) -> list[tuple[str, int]]:
    pos = 0 if kind == "site" else 1
    return [(p, a) for p, a in state.slots() if (o := state.option(p, a)) is not None and o[pos] == entity]


def isf(model: QuboModel, x, budget: int = 20, rng=None) -> Solution | None:
    """Repair ``x`` towards feasibility; ``None`` signals an exhausted budget.

    Each round first strips over-assigned sites and suppliers, then unassigns
    wrongful slots and reassigns every open slot deepest part first, preferring
    options that feed entities still below their minimum.  If only minimum
    windows remain violated, one slot is released so that the next round can
    move it.
    """
    rng = np.random.default_rng(rng)
    state = Assignment.from_x(model, x)
    lay = model.layout
    for _ in range(budget + 1):
        if state.is_complete() and not _wrongful(model, state) and not state.over_capacity() \
                and not state.under_minimum():
            sol = _finish(model, state)
            if sol is not None:
                return sol
        for kind, entity in state.over_capacity():
            bound = state._bounds()[0 if kind == "site" else 1][entity][1]
            load = state.site_load if kind == "site" else state.sup_load
            while load[entity] > bound:
                slots = _entity_slots(state, kind, entity)
                p, a = slots[rng.integers(len(slots))]
                state.unassign(p, a)
        for p, a in _wrongful(model, state):
            state.unassign(p, a)
        if state.is_complete() and state.under_minimum():
            kind, entity = state.under_minimum()[rng.integers(len(state.under_minimum()))]
            pos = 0 if kind == "site" else 1
            movable = [(p, a) for p, a in state.slots()
                       if state.option(p, a)[pos] != entity
                       and any(opt[pos] == entity for opt in lay.options[p])]
            if movable:
                state.unassign(*movable[rng.integers(len(movable))])
        under = set(state.under_minimum())
        for part in _level_order(model, rng, deepest_first=True):
            for a in state.sources(part):
                if state.choice[part][a] is not None:
                    continue
                opts = feasible_options(model, state, part, a)
                if not opts:
                    parent = model.instance.part_by_id[part].parent
                    if parent is not None:
                        state.unassign(parent, int(rng.integers(len(state.sources(parent)))))
                    continue
                pref = [o for o in opts if ("site", lay.options[part][o][0]) in under
                        or ("supplier", lay.options[part][o][1]) in under]
                pick = pref if pref else opts
                state.assign(part, a, int(pick[rng.integers(len(pick))]))
                under = set(state.under_minimum())
    return None


def isi(model: QuboModel, x, iterations: int = 100, stop_prob: float = 0.5, rng=None,
        trace: list | None = None) -> Solution:
    """Greedy random-part improvement of a feasible ``x``; every accepted move strictly lowers Q."""
    rng = np.random.default_rng(rng)
    state = Assignment.from_x(model, x)
    current = Solution.from_x(model, x)
    if not current.feasible:
        raise ValueError("isi needs a feasible starting point")
    best = current.objective
    movable = [p for p in model.layout.parts if len(model.layout.options[p]) > 1]
    for _ in range(iterations if movable else 0):
        part = movable[rng.integers(len(movable))]
        srcs = state.sources(part)
        keep = [state.choice[part][a] for a in srcs]
        for a in srcs:
            state.unassign(part, a)
        pairs = []
        for o1 in feasible_options(model, state, part, 0):
            if len(srcs) == 1:
                pairs.append((o1,))
                continue
            state.assign(part, 0, o1)
            pairs.extend((o1, o2) for o2 in feasible_options(model, state, part, 1))
            state.unassign(part, 0)
        accepted = None
        for t in rng.permutation(len(pairs)):
            cand = pairs[t]
            if list(cand) == keep:
                continue
            for a, o in zip(srcs, cand):
                state.assign(part, a, o)
            if not state.under_minimum():
                fill = ancilla_fill(model, model.layout.contract(state.to_full()))
                if fill.ok:
                    q = model.energy(fill.x)
                    if q < best - 1e-12:
                        best, accepted = q, cand
                        if trace is not None:
                            trace.append(q)
                        if rng.random() < stop_prob:
                            break
            for a in srcs:
                state.unassign(part, a)
        for a, o in zip(srcs, accepted if accepted is not None else keep):
            state.assign(part, a, o)
    return Solution.from_assignment(state)
