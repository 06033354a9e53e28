import dataclasses as dc
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainopt.instance import (FeasibleOption, GenerationError, InstanceError, Part, ProblemInstance, Site,
                               Supplier, dumps, generate_synthetic, load_instance, loads, part_levels,
                               save_instance)
from chainopt.informed import isg
from chainopt.preprocess import reduce_instance
from chainopt.qubo import compile_model


def minimal():
    return ProblemInstance(
        parts=(Part("A", 1.0, 1.0, None, 1.0),),
        sites=(Site("S", "R", 0, 100),),
        warehouses=(),
        suppliers=(Supplier("U", 0, 100, 50),),
        regions=("R",),
        transport=(),
        feasible=(FeasibleOption("A", "S", "U"),),
    )


def test_minimal_file_loads(tmp_path):
    path = tmp_path / "one.json"
    save_instance(minimal(), path)
    inst = load_instance(path)
    assert len(inst.parts) == 1
    assert inst.root == "A"


def test_unknown_parent_rejected():
    data = json.loads(dumps(minimal()))
    data["parts"].append({"id": "B", "value": 1, "volume": 1, "parent": "ghost", "alpha": 1})
    data["feasible"].append({"part": "B", "site": "S", "supplier": "U"})
    with pytest.raises(InstanceError, match="unknown parent"):
        loads(json.dumps(data))


def test_generator_round_trip(tmp_path):
    inst = generate_synthetic(8, 4, 3, 2, 2, 0.5, 0.8, 42)
    save_instance(inst, tmp_path / "i.json")
    assert load_instance(tmp_path / "i.json") == inst


def test_malformed_json_reports_line():
    with pytest.raises(InstanceError, match="line 2"):
        loads('{\n  "parts": [,\n}')


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["parts"][0].update(alpha=0.3), "alpha"),
    (lambda d: d["sites"][0].update(ws_min=90, ws_max=10), "window"),
    (lambda d: d["suppliers"][0].update(ws_target=101), "target"),
    (lambda d: d.update(feasible=[]), "no feasible"),
    (lambda d: d["parts"].append(dict(d["parts"][0])), "duplicate"),
    (lambda d: d.pop("regions"), "regions"),
])
def test_validation_errors(mutate, message):
    data = json.loads(dumps(minimal()))
    mutate(data)
    with pytest.raises(InstanceError, match=message):
        loads(json.dumps(data))


def test_levels_single_node():
    assert part_levels(minimal()) == {"A": 0}


def test_levels_root_with_two_leaves():
    parts = (Part("r", 1, 1, None, 1), Part("a", 1, 1, "r", 1), Part("b", 1, 1, "r", 1))
    inst = dc.replace(minimal(), parts=parts)
    assert part_levels(inst) == {"r": 0, "a": 1, "b": 1}


def test_levels_cycle_detected():
    parts = (Part("r", 1, 1, None, 1), Part("a", 1, 1, "b", 1), Part("b", 1, 1, "a", 1))
    with pytest.raises(InstanceError, match="cycle"):
        part_levels(dc.replace(minimal(), parts=parts))


def _depth(parent, node):
    return 0 if parent[node] is None else 1 + _depth(parent, parent[node])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_levels_match_recursive_descent(seed, n):
    rng = np.random.default_rng(seed)
    parent = {"p0": None}
    for k in range(1, n):
        parent[f"p{k}"] = f"p{rng.integers(k)}"
    order = rng.permutation(n)
    parts = tuple(Part(f"p{k}", 1, 1, parent[f"p{k}"], 1) for k in order)
    levels = part_levels(dc.replace(minimal(), parts=parts))
    assert levels == {p: _depth(parent, p) for p in parent}


def test_seven_node_tree_seed7():
    rng = np.random.default_rng(7)
    parent = {"p0": None, **{f"p{k}": f"p{rng.integers(k)}" for k in range(1, 7)}}
    parts = tuple(Part(p, 1, 1, q, 1) for p, q in parent.items())
    assert part_levels(dc.replace(minimal(), parts=parts)) == {p: _depth(parent, p) for p in parent}


def test_degenerate_generator_is_immobile():
    inst = generate_synthetic(1, 1, 1, 0, 1, 1.0, 1.0, 0)
    assert len(inst.parts) == 1
    assert inst.immobile[inst.root]


def test_generator_deterministic():
    a = dumps(generate_synthetic(8, 4, 3, 2, 2, 0.5, 0.8, 42))
    b = dumps(generate_synthetic(8, 4, 3, 2, 2, 0.5, 0.8, 42))
    assert a == b
    assert a != dumps(generate_synthetic(8, 4, 3, 2, 2, 0.5, 0.8, 43))


def test_generator_admits_isg_solution():
    inst = generate_synthetic(8, 4, 3, 2, 2, 0.5, 0.8, 42)
    model = compile_model(reduce_instance(inst), (0.25,) * 4)
    assert isg(model, np.random.default_rng(0), max_restarts=100).feasible


@pytest.mark.parametrize("args", [
    (0, 1, 1, 0, 1, 0.5, 0.8, 0),
    (3, 2, 1, 0, 1, 0.0, 0.8, 0),
    (3, 2, 1, 0, 1, 0.5, 0.4, 0),
    (3, 2, 1, 0, 3, 0.5, 0.8, 0),
])
def test_generator_rejects_bad_parameters(args):
    with pytest.raises(GenerationError):
        generate_synthetic(*args)


def test_relative_values_are_percent():
    inst = generate_synthetic(6, 3, 2, 1, 2, 0.5, 0.8, 1)
    assert sum(inst.relative_values.values()) == pytest.approx(100.0)


def test_with_alpha_revalidates():
    inst = minimal()
    assert inst.with_alpha(0.6).parts[0].alpha == 0.6
    with pytest.raises(InstanceError):
        inst.with_alpha(0.2)
