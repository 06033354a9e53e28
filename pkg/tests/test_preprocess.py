import numpy as np
import pytest

from helpers import path_cost, random_graph_instance, simple_paths, small_instance
from chainopt.instance import FeasibleOption, Part, ProblemInstance, Site, Supplier, TransportMethod
from chainopt.preprocess import (InfeasibleInstanceError, edge_cost, feasibility_reduction, gamma, kpi_scales,
                                 optimal_routes, reachability, reduce_instance, routes_to_csv)


def chain(methods, child_sites=("S0", "S1"), parent_sites=("S0", "S1"), warehouses=("W",)):
    """Two-part chain P1 -> P0 on sites S0, S1."""
    parts = (Part("P0", 2.0, 2.0, None, 0.8), Part("P1", 1.0, 1.0, "P0", 0.8))
    sites = (Site("S0", "R0", 0, 100), Site("S1", "R1", 0, 100))
    feas = tuple(FeasibleOption("P0", s, "U") for s in parent_sites)
    feas += tuple(FeasibleOption("P1", s, "U") for s in child_sites)
    return ProblemInstance(parts, sites, warehouses, (Supplier("U", 0, 100, 50),), ("R0", "R1"),
                           tuple(methods), feas)


def tm(mid, a, b, c=(1.0, 1.0, 1.0), vol=1.0, part="P1"):
    return TransportMethod(mid, part, a, b, *c, cargo_volume=vol)


def test_edge_cost_zero_weights():
    inst = chain([tm("m", "S1", "S0")])
    assert edge_cost(inst, "P1", inst.transport[0], (0, 0, 0), kpi_scales(inst)) == 0


def test_edge_cost_normalisation_cancels():
    inst = chain([tm("m", "S1", "S0", (7.0, 2.0, 3.0)), tm("n", "S0", "S1", (4.0, 9.0, 1.0))])
    d = kpi_scales(inst)
    assert d[0] == 7.0
    assert edge_cost(inst, "P1", inst.transport[0], (1, 0, 0), d) == 1.0


def test_edge_cost_hand_sum():
    inst = random_graph_instance(3)
    m = inst.transport[0]
    d = kpi_scales(inst)
    w = (0.3, 0.3, 0.4)
    frac = inst.part_by_id["P0"].volume / m.cargo_volume
    level = inst.levels["P0"]
    hand = w[0] * m.c1 * frac / d[0] + w[1] * m.c2 * frac / d[1] + w[2] * m.c3 * level / d[2]
    assert edge_cost(inst, "P0", m, w, d) == pytest.approx(hand, rel=1e-12)
    assert gamma(inst, "P0", m) == (frac, frac, level)


def test_single_edge_is_the_route():
    inst = chain([tm("m", "S1", "S0")])
    r = optimal_routes(inst, "P1", (1, 0, 0))
    assert r[("S1", "S0")].methods == ("m",)
    assert ("S0", "S1") not in r


def test_two_hop_beats_expensive_direct_edge():
    inst = chain([tm("direct", "S1", "S0", (5.0, 0, 0)),
                  tm("a", "S1", "W", (1.5, 0, 0)), tm("b", "W", "S0", (1.5, 0, 0))])
    d = np.ones(4)
    r = optimal_routes(inst, "P1", (1, 0, 0), d)[("S1", "S0")]
    assert r.methods == ("a", "b")
    assert r.cost == 3.0
    assert r.contributions[0] == 3.0


@pytest.mark.parametrize("seed", range(10))
def test_routes_match_path_enumeration(seed):
    inst = random_graph_instance(seed, 6)
    wbar = (0.2, 0.5, 0.3)
    d = kpi_scales(inst)
    costs = {m.id: edge_cost(inst, "P0", m, wbar, d) for m in inst.transport}
    routes = optimal_routes(inst, "P0", wbar, d)
    for k in (s.id for s in inst.sites):
        for l in (s.id for s in inst.sites):
            if k == l:
                continue
            paths = simple_paths(inst.transport, k, l)
            if paths:
                assert routes[(k, l)].cost == min(path_cost(costs, p) for p in paths)
            else:
                assert (k, l) not in routes


def test_reachability_includes_self():
    inst = chain([tm("a", "S1", "W"), tm("b", "W", "S0")])
    reach = reachability(inst, "P1")
    assert reach["S1"] == {"S0", "S1"}
    assert reach["S0"] == {"S0"}


def test_fully_connected_keeps_everything():
    inst = chain([tm("a", "S1", "S0"), tm("b", "S0", "S1")])
    g = feasibility_reduction(inst)
    assert g == {p: tuple((f.site, f.supplier) for f in inst.options[p]) for p in ("P0", "P1")}


def test_stranded_leaf_is_infeasible():
    inst = chain([], child_sites=("S1",), parent_sites=("S0",))
    with pytest.raises(InfeasibleInstanceError, match="P"):
        feasibility_reduction(inst)


def test_reduction_prunes_unreachable_option():
    inst = chain([tm("a", "S1", "S0")], parent_sites=("S0",))
    assert feasibility_reduction(inst)["P1"] == (("S0", "U"), ("S1", "U"))
    inst = chain([tm("a", "S0", "S1")], parent_sites=("S0",))
    assert feasibility_reduction(inst)["P1"] == (("S0", "U"),)


def test_reduction_is_order_independent():
    inst = small_instance(42)
    ids = [p.id for p in inst.parts]
    a = feasibility_reduction(inst, order=ids)
    b = feasibility_reduction(inst, order=list(reversed(ids)))
    c = feasibility_reduction(inst, order=list(np.random.default_rng(1).permutation(ids)))
    assert a == b == c


def test_reduced_instance_route_cache():
    red = reduce_instance(small_instance(42))
    t1 = red.routes((0.2, 0.3, 0.5))
    assert red.routes((0.2, 0.3, 0.5)) is t1
    text = routes_to_csv(t1)
    assert text.splitlines()[0].startswith("part")
    for (i, _j) in red.instance.edges:
        for (k, l), r in t1[i].items():
            assert r.cost >= 0 and k != l
