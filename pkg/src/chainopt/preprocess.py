"""Route pre-optimisation and feasibility reduction.

Every part moves on its own directed multigraph over sites and warehouses.  For a
given weight vector ``wbar = (w1, w2, w3)`` the cheapest route between each pair of
production sites is found with Dijkstra's algorithm; the feasible site-supplier
options are then pruned to those that can exchange parts with at least one option
of every PBS neighbour.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .instance import ProblemInstance, TransportMethod


class InfeasibleInstanceError(ValueError):
    """A part has no option left after the feasibility reduction."""


@dataclass(frozen=True)
class Route:
    methods: tuple[str, ...]
    contributions: tuple[float, float, float]
    cost: float


def kpi_scales(instance: ProblemInstance) -> np.ndarray:
    """Rescaling factors d_1..d_4.

    d_1, d_2 are the largest emission / cost of any method, d_3 the largest
    transport time times the mid-range of PBS levels and d_4 = 100.  A factor that
    would vanish (no transport at all, or a single-level tree) is replaced by 1.
    """
    c = np.zeros(3)
    for m in instance.transport:
        c = np.maximum(c, (m.c1, m.c2, m.c3))
    levels = list(instance.levels.values())
    mid = (min(levels) + max(levels)) / 2
    d = np.array([c[0], c[1], c[2] * mid, 100.0])
    d[d <= 0] = 1.0
    return d


def gamma(instance: ProblemInstance, part: str, method: TransportMethod) -> tuple[float, float, float]:
    """Per-KPI scaling: occupied cargo fraction for emissions and cost, PBS level for time."""
    p = instance.part_by_id[part]
    frac = p.volume / method.cargo_volume
    return frac, frac, float(instance.levels[part])


def edge_cost(instance: ProblemInstance, part: str, method: TransportMethod,
              wbar, d) -> float:
    g = gamma(instance, part, method)
    total = 0.0
    for n in range(3):
        if wbar[n] != 0:
            total += wbar[n] / d[n] * method.kpi(n + 1) * g[n]
    return total


def _dijkstra(instance, part, source, costs, adj):
    # label = (cost, hops, method-id sequence); lexicographic comparison gives the tie-break
    best = {source: (0.0, 0, ())}
    heap = [(0.0, 0, (), source)]
    done = set()
    while heap:
        cost, hops, seq, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        for m in adj.get(node, ()):
            nxt = m.destination
            if nxt in done:
                continue
            cand = (cost + costs[m.id], hops + 1, seq + (m.id,))
            if nxt not in best or cand < best[nxt]:
                best[nxt] = cand
                heapq.heappush(heap, (*cand, nxt))
    return best


def optimal_routes(instance: ProblemInstance, part: str, wbar, d=None,
                   origins=None, destinations=None) -> dict[tuple[str, str], Route]:
    """Cheapest route between ordered pairs of distinct production sites for one part.

    Pairs without any path are absent.  The contributions of a route are reported
    per KPI (unweighted); ``cost`` is the scalarised path length used by the search.
    """
    if d is None:
        d = kpi_scales(instance)
    methods = instance.methods_by_part[part]
    by_id = {m.id: m for m in methods}
    costs = {m.id: edge_cost(instance, part, m, wbar, d) for m in methods}
    adj: dict[str, list[TransportMethod]] = {}
    for m in methods:
        adj.setdefault(m.origin, []).append(m)
    sites = [s.id for s in instance.sites]
    origins = sites if origins is None else origins
    dests = set(sites if destinations is None else destinations)
    routes = {}
    for k in origins:
        if k not in adj:
            continue
        labels = _dijkstra(instance, part, k, costs, adj)
        for l, (cost, _, seq) in labels.items():
            if l == k or l not in dests:
                continue
            contrib = [0.0, 0.0, 0.0]
            for mid in seq:
                m = by_id[mid]
                g = gamma(instance, part, m)
                for n in range(3):
                    contrib[n] += m.kpi(n + 1) * g[n]
            routes[(k, l)] = Route(seq, tuple(contrib), cost)
    return routes


def reachability(instance: ProblemInstance, part: str) -> dict[str, frozenset[str]]:
    """Sites reachable from each site for ``part`` (a site always reaches itself)."""
    adj: dict[str, set[str]] = {}
    for m in instance.methods_by_part[part]:
        adj.setdefault(m.origin, set()).add(m.destination)
    site_ids = {s.id for s in instance.sites}
    out = {}
    for k in site_ids:
        seen = {k}
        stack = [k]
        while stack:
            node = stack.pop()
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        out[k] = frozenset(seen & site_ids)
    return out


def feasibility_reduction(instance: ProblemInstance, reach=None, order=None) -> dict[str, tuple]:
    """Greatest fixed point of the neighbour-connectivity filter on the feasible options.

    Returns ``{part: ((site, supplier), ...)}``.  ``order`` permutes the part
    iteration order (the result does not depend on it).
    """
    if reach is None:
        reach = {p.id: reachability(instance, p.id) for p in instance.parts}
    g = {pid: [(f.site, f.supplier) for f in opts] for pid, opts in instance.options.items()}
    parts = [p.id for p in instance.parts] if order is None else list(order)
    by_level = sorted(parts, key=lambda p: -instance.levels[p])
    passes = [by_level, by_level[::-1]]  # bottom-up, then top-down
    changed = True
    while changed:
        changed = False
        for sweep in passes:
            for i in sweep:
                parent = instance.part_by_id[i].parent
                parent_sites = None if parent is None else {l for l, _ in g[parent]}
                child_sites = [(c, {l for l, _ in g[c]}) for c in instance.children[i]]
                keep = []
                for k, u in g[i]:
                    if parent_sites is not None and not (reach[i][k] & parent_sites):
                        continue
                    if any(not any(k in reach[c][l] for l in ls) for c, ls in child_sites):
                        continue
                    keep.append((k, u))
                if len(keep) != len(g[i]):
                    g[i] = keep
                    changed = True
                    if not keep:
                        raise InfeasibleInstanceError(f"part {i!r} has no feasible option left")
    return {pid: tuple(v) for pid, v in g.items()}


def _wkey(wbar) -> tuple[float, float, float]:
    return tuple(round(float(w), 12) for w in wbar[:3])


@dataclass
class ReducedInstance:
    """Instance plus reduced option sets g_i and per-weight route tables."""

    instance: ProblemInstance
    options: dict[str, tuple[tuple[str, str], ...]]
    reach: dict[str, dict[str, frozenset[str]]]
    _routes: dict = field(default_factory=dict, repr=False)

    @cached_property
    def scales(self) -> np.ndarray:
        return kpi_scales(self.instance)

    @cached_property
    def assignable_sites(self) -> dict[str, tuple[str, ...]]:
        return {p: tuple(dict.fromkeys(k for k, _ in opts)) for p, opts in self.options.items()}

    @cached_property
    def assignable_regions(self) -> dict[str, tuple[str, ...]]:
        sites = self.instance.site_by_id
        return {p: tuple(dict.fromkeys(sites[k].region for k in ks))
                for p, ks in self.assignable_sites.items()}

    @property
    def forced(self) -> dict[str, tuple[str, str]]:
        """Parts whose reduced option set has a single element."""
        return {p: opts[0] for p, opts in self.options.items() if len(opts) == 1}

    def reachable(self, part: str, k: str, l: str) -> bool:
        return l in self.reach[part][k]

    def routes(self, wbar) -> dict[str, dict[tuple[str, str], Route]]:
        key = _wkey(wbar)
        if key not in self._routes:
            table = {}
            for i, j in self.instance.edges:
                origins = self.assignable_sites[i]
                dests = self.assignable_sites[j]
                table[i] = optimal_routes(self.instance, i, key, self.scales, origins, dests)
            self._routes[key] = table
        return self._routes[key]

    def route_contribution(self, wbar, part: str, k: str, l: str) -> tuple[float, float, float] | None:
        """Unweighted KPI contributions of moving ``part`` from site k to l (None if impossible)."""
        if k == l:
            return (0.0, 0.0, 0.0)
        r = self.routes(wbar)[part].get((k, l))
        return None if r is None else r.contributions


def reduce_instance(instance: ProblemInstance) -> ReducedInstance:
    reach = {p.id: reachability(instance, p.id) for p in instance.parts}
    return ReducedInstance(instance, feasibility_reduction(instance, reach), reach)


def routes_to_csv(table: dict[str, dict[tuple[str, str], Route]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["part", "origin", "dest", "c1", "c2", "c3", "route"])
    for part in table:
        for (k, l), r in sorted(table[part].items()):
            w.writerow([part, k, l, *(repr(float(c)) for c in r.contributions), ";".join(r.methods)])
    return buf.getvalue()


def route_path_cost(instance, part, methods, wbar, d) -> float:
    by_id = {m.id: m for m in instance.methods_by_part[part]}
    return math.fsum(edge_cost(instance, part, by_id[m], wbar, d) for m in methods)
