import json

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import small_instance, tiny_model
from chainopt.informed import isg
from chainopt.preprocess import reduce_instance
from chainopt.qubo import (ModelError, Multipliers, Qubo, RationalApprox, Weights, ancilla_bits, ancilla_fill,
                           compile_model, evaluate, export_model, rational_approx, to_ising)
from chainopt.qubo.core import Poly, from_ising
from chainopt.qubo.export import load_coo
from chainopt.solvers import brute_force


@pytest.fixture(scope="module")
def reduced():
    return reduce_instance(small_instance(42))


@pytest.fixture(scope="module")
def model(reduced):
    return compile_model(reduced, (0.25,) * 4, Multipliers((2.0,) * 6))


# -- rational approximation ---------------------------------------------------------

def test_rational_exact_percent():
    assert rational_approx([50.0], 10).tolist() == [500]


def test_rational_rounding_bound():
    P = rational_approx([0.26], 10)
    assert P.tolist() == [3]
    assert abs(0.26 - P[0] / 10) == pytest.approx(0.04)


def test_rational_ties_to_even():
    assert rational_approx([0.25, 0.35], 10).tolist() == [2, 4]


def test_share_numerator_for_alpha_08():
    ra = RationalApprox.build([100.0], [0.8], 10, 5)
    assert ra.Pbar.tolist() == [4]
    assert ra.eps_bar[0] == pytest.approx(0.0, abs=1e-15)
    assert ra.dbar(0, 0) == 4 and ra.dbar(0, 1) == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=30), st.integers(1, 50))
def test_rational_error_within_half_step(values, R):
    P = rational_approx(values, R)
    assert np.all(np.abs(np.asarray(values) - P / R) <= 1 / (2 * R) + 1e-12)


def test_bad_weights_and_multipliers():
    with pytest.raises(ModelError):
        Weights((0.5, 0.5, 0.5, 0.0))
    with pytest.raises(ModelError):
        Multipliers((0, 1, 1, 1, 1, 1))
    Multipliers((1, 1, 1, 1, 0, 0))


def test_ancilla_counter_arithmetic():
    assert ancilla_bits(7 - 0) == 3
    assert ancilla_bits(0) == 0
    with pytest.raises(ModelError):
        ancilla_bits(-1)


# -- compilation ----------------------------------------------------------------------

def test_layout_counts(model):
    lay = model.layout
    assert lay.N_x == lay.N_y + lay.N_z == model.n
    assert lay.N_z == sum(g.bits for g in lay.groups)


def test_matrix_matches_analytic(model):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x = rng.integers(0, 2, model.n)
        assert evaluate(model, x).objective == pytest.approx(model.energy(x), abs=1e-9)


def test_zero_weight_kills_terms(reduced):
    m = compile_model(reduced, (0, 0, 0, 1))
    assert all(m.terms[f"C{n}"].is_empty() for n in (1, 2, 3))
    m = compile_model(reduced, (1, 0, 0, 0))
    assert m.terms["C4"].is_empty() and not m.terms["C1"].is_empty()


def test_root_only_instance_has_no_transport_terms():
    from chainopt.instance import generate_synthetic
    red = reduce_instance(generate_synthetic(1, 2, 1, 0, 1, 1.0, 0.8, 0))
    m = compile_model(red, (0.3, 0.3, 0.3, 0.1))
    assert all(m.terms[f"C{n}"].is_empty() for n in (1, 2, 3))


def test_transport_coefficient_by_hand():
    from chainopt.instance import FeasibleOption, Part, ProblemInstance, Site, Supplier, TransportMethod
    parts = (Part("P0", 2.0, 2.0, None, 0.8), Part("P1", 1.0, 1.0, "P0", 0.8))
    sites = (Site("S0", "R0", 0, 100), Site("S1", "R1", 0, 100))
    meth = (TransportMethod("a", "P1", "S1", "S0", 4.0, 6.0, 2.0, 2.0),
            TransportMethod("b", "P1", "S0", "S1", 4.0, 6.0, 2.0, 2.0))
    feas = tuple(FeasibleOption(p, s, "U") for p in ("P0", "P1") for s in ("S0", "S1"))
    inst = ProblemInstance(parts, sites, (), (Supplier("U", 0, 100, 50),), ("R0", "R1"), meth, feas)
    red = reduce_instance(inst)
    w = (0.1, 0.6, 0.2, 0.1)
    m = compile_model(red, w, fold_forced=False)
    lay = m.layout
    child = lay.slots["P1"][0][lay.options["P1"].index(("S1", "U"))]
    parent = lay.slots["P0"][0][lay.options["P0"].index(("S0", "U"))]
    d2 = red.scales[1]
    expected = (w[1] / d2) * 0.8 * (1.0 / 2.0) * 6.0
    assert m.terms["C2"].coefficient(child, parent) == pytest.approx(expected, rel=1e-12)


def test_isg_solution_zeroes_penalties(model):
    sol = isg(model, np.random.default_rng(3))
    fill = ancilla_fill(model, sol.x)
    assert fill.ok
    ev = evaluate(model, fill.x)
    assert ev.feasible and not ev.penalties.any()


def test_double_site_choice_violates_one_hot(model):
    sol = isg(model, np.random.default_rng(3))
    part, a, idx = model.layout.one_hot_groups()[0]
    x = sol.x.copy()
    x[idx] = 1
    assert evaluate(model, x).penalties[1] >= 1


def test_all_zero_violates_every_one_hot(reduced):
    m = compile_model(reduced, (0.25,) * 4, fold_forced=False)
    ev = evaluate(m, np.zeros(m.n, dtype=np.int8))
    assert not ev.feasible
    assert ev.penalties[1] == 2 * len(m.layout.parts)


def test_penalties_non_negative(model):
    rng = np.random.default_rng(1)
    X = rng.integers(0, 2, (300, model.n))
    assert all((evaluate(model, x).penalties >= 0).all() for x in X)


def test_fold_forced_preserves_objective(reduced):
    inst = reduced.instance
    leaf = next(p.id for p in inst.parts if not inst.children[p.id])
    keep = reduced.options[leaf][0]
    feas = [f for f in inst.feasible if f.part != leaf or (f.site, f.supplier) == keep]
    red = reduce_instance(inst.replace(feasible=feas))
    folded = compile_model(red, (0.25,) * 4, fold_forced=True)
    plain = compile_model(red, (0.25,) * 4, fold_forced=False)
    assert folded.layout.fixed, "instance should have a forced part"
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.integers(0, 2, folded.n)
        full = folded.layout.expand(x)
        assert plain.energy(plain.layout.contract(full)) == pytest.approx(folded.energy(x), abs=1e-9)


def test_ancilla_fill_reports_overloaded_site(model):
    sol = isg(model, np.random.default_rng(0))
    lay = model.layout
    site = next(g.entity for g in lay.groups if g.family == "5<=" and g.active)
    x = sol.x.copy()
    for p in lay.parts:
        for a in ((0,) if lay.aliased[p] else (0, 1)):
            idx = lay.full_to_free[lay.slots[p][a]]
            if any(k == site for k, _ in lay.options[p]) and np.all(idx >= 0):
                x[idx] = 0
                x[idx[[k for k, _ in lay.options[p]].index(site)]] = 1
    fill = ancilla_fill(model, x)
    assert any(v.entity == site and v.family == "5<=" for v in fill.violations)


def test_zero_slack_gives_zero_bits(model):
    sol = isg(model, np.random.default_rng(0))
    fill = ancilla_fill(model, sol.x)
    full = model.layout.expand(fill.x)
    from chainopt.qubo.evaluate import workshare_units
    site_load, sup_load = workshare_units(model, full)
    for g in model.layout.groups:
        load = (site_load if g.family[0] == "5" else sup_load)[g.entity]
        slack = load - g.bound if g.family.endswith(">=") else g.bound - load
        if g.active and slack == 0:
            assert not full[g.indices].any()


def test_brute_force_optimum_is_minimal():
    m = tiny_model(3)
    best = brute_force(m)
    X = np.random.default_rng(0).integers(0, 2, (2000, m.n))
    assert (m.energies(X) >= best.energy - 1e-9).all()


# -- Ising transform ------------------------------------------------------------------

def test_zero_qubo_to_ising():
    ising = to_ising(Qubo.from_dense(np.zeros((3, 3))))
    assert ising.J.nnz == 0 and not ising.h.any() and ising.offset == 0


def test_single_variable_ising():
    ising = to_ising(Qubo.from_dense(np.array([[1.0]])))
    assert ising.energy(np.array([-1])) + ising.offset == pytest.approx(0.0)
    assert ising.energy(np.array([1])) + ising.offset == pytest.approx(1.0)


def test_exhaustive_ising_identity_12():
    rng = np.random.default_rng(12)
    q = Qubo.from_dense(np.triu(rng.normal(size=(12, 12))), offset=0.7)
    ising = to_ising(q)
    idx = np.arange(1 << 12)
    X = ((idx[:, None] >> np.arange(12)) & 1).astype(np.int8)
    assert np.allclose(q.energies(X), ising.energies(2 * X - 1) + ising.offset, atol=1e-9)


def test_from_ising_round_trip():
    rng = np.random.default_rng(5)
    q = Qubo.from_dense(np.triu(rng.normal(size=(7, 7))), offset=-1.5)
    back = from_ising(to_ising(q))
    X = rng.integers(0, 2, (100, 7))
    assert np.allclose(q.energies(X), back.energies(X), atol=1e-10)


def test_poly_square_expansion():
    p = Poly(3)
    p.add_square([0, 1, 2], np.array([1.0, -2.0, 1.0]), c0=-1.0)
    for bits in range(8):
        x = np.array([(bits >> k) & 1 for k in range(3)])
        assert p.evaluate(x) == pytest.approx((x[0] - 2 * x[1] + x[2] - 1) ** 2)


# -- export ---------------------------------------------------------------------------

def test_export_round_trip(model, tmp_path):
    coo, meta = export_model(model, tmp_path / "m")
    back = load_coo(coo, model.n)
    diff = sp.csr_matrix(back.matrix) - model.qubo.matrix
    assert abs(diff).max() == 0 if diff.nnz else True
    data = json.loads(meta.read_text())
    assert data["n"] == model.n and data["N_y"] + data["N_z"] == model.n
    assert len({v["index"] for v in data["variables"] if v["fixed"] is None}) == model.layout.N_y
