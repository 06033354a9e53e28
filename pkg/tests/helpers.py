"""Shared builders and brute-force oracles for the test suite."""

from __future__ import annotations

import dataclasses as dc
import math
from functools import lru_cache

import numpy as np

from chainopt.instance import (FeasibleOption, Part, ProblemInstance, Site, Supplier, TransportMethod,
                               generate_synthetic)
from chainopt.preprocess import reduce_instance
from chainopt.qubo import compile_model, evaluate
from chainopt.solvers import brute_force


def small_instance(seed: int = 42, n_parts: int = 8):
    return generate_synthetic(n_parts, 4, 3, 2, 2, 0.5, 0.8, seed)


def tiny_instance(seed: int, n_parts: int = 3, keep: int = 3) -> ProblemInstance:
    """Few parts, at most ``keep`` options each, open workshare windows."""
    rng = np.random.default_rng(seed)
    inst = generate_synthetic(n_parts, 3, 2, 1, 2, 0.8, 0.8, seed)
    sites = tuple(dc.replace(s, ws_min=0, ws_max=100) for s in inst.sites)
    sups = tuple(dc.replace(u, ws_min=0, ws_max=100) for u in inst.suppliers)
    feas = []
    for p in inst.parts:
        opts = [f for f in inst.feasible if f.part == p.id]
        pick = rng.choice(len(opts), size=min(keep, len(opts)), replace=False)
        feas += [opts[i] for i in sorted(pick)]
    return inst.replace(sites=sites, suppliers=sups, feasible=tuple(feas))


def tiny_model(seed: int, n_parts: int = 3, keep: int = 3, weights=(0.25,) * 4):
    inst = tiny_instance(seed, n_parts, keep)
    return compile_model(reduce_instance(inst), weights, R=1, Rbar=2, prune_vacuous=True)


@lru_cache(maxsize=None)
def oracle_cases(count: int = 10, lo: int = 14, hi: int = 22) -> tuple:
    """(seed, model, optimum) for tiny instances whose exhaustive optimum is feasible."""
    out = []
    for seed in range(1000):
        try:
            model = tiny_model(seed)
        except Exception:
            continue
        if not lo <= model.n <= hi:
            continue
        best = brute_force(model)
        if not evaluate(model, best.x).feasible:
            continue
        out.append((seed, model, best.energy))
        if len(out) == count:
            break
    return tuple(out)


# -- routing oracle ------------------------------------------------------------------

def random_graph_instance(seed: int, n_nodes: int = 8) -> ProblemInstance:
    """One part moving on a random multigraph over sites and warehouses."""
    rng = np.random.default_rng(seed)
    n_sites = int(rng.integers(2, min(5, n_nodes) + 1))
    sites = tuple(Site(f"S{k}", "R0", 0, 100) for k in range(n_sites))
    warehouses = tuple(f"W{k}" for k in range(n_nodes - n_sites))
    nodes = [s.id for s in sites] + list(warehouses)
    methods = []
    for a in nodes:
        for b in nodes:
            if a == b or rng.random() > 0.35:
                continue
            for _ in range(int(rng.integers(1, 3))):
                methods.append(TransportMethod(f"m{len(methods)}", "P0", a, b,
                                               *np.round(rng.uniform(0.1, 10, 3), 3),
                                               cargo_volume=float(rng.uniform(1, 4))))
    parts = (Part("P0", 1.0, 1.0, None, 0.8),)
    feas = tuple(FeasibleOption("P0", s.id, "U0") for s in sites)
    return ProblemInstance(parts, sites, warehouses, (Supplier("U0", 0, 100, 50),), ("R0",),
                           tuple(methods), feas)


def simple_paths(methods, src, dst):
    """Every simple path from src to dst as a tuple of methods."""
    adj = {}
    for m in methods:
        adj.setdefault(m.origin, []).append(m)
    out = []

    def walk(node, seen, path):
        if node == dst:
            out.append(tuple(path))
            return
        for m in adj.get(node, ()):
            if m.destination not in seen:
                walk(m.destination, seen | {m.destination}, path + [m])

    walk(src, {src}, [])
    return out


def path_cost(costs, path) -> float:
    total = 0.0
    for m in path:      # same accumulation order as the search
        total = total + costs[m.id]
    return total


def close(a, b, tol=1e-9) -> bool:
    return math.isclose(a, b, rel_tol=0, abs_tol=tol)
