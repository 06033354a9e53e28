import math

import numpy as np
import pytest
import scipy.sparse as sp

from chainopt.qubo.core import from_ising as from_spins
from chainopt.qubo import IsingModel, Qubo, bits_to_spins, spins_to_bits, to_ising
from chainopt.solvers import (CacmParams, IbpParams, QaoaError, QaoaParams, SaParams, TooLargeError, TreeBP,
                              brute_force, brute_force_gray, cacm_solve, ibp_solve, qaoa_solve, ramp, sa_solve,
                              sample_tree)
from chainopt.solvers.qaoa import basis_energies, leakage, statevector, subspace_mask
from chainopt.metasolvers import CACM_SPECS
from chainopt.tuning import DasState, tune


def ising(J, h, offset=0.0):
    return IsingModel(sp.csr_matrix(np.asarray(J, dtype=float)), np.asarray(h, dtype=float), offset)


def random_sparse_ising(seed, n=16, density=0.25):
    rng = np.random.default_rng(seed)
    J = np.triu(rng.normal(size=(n, n)) * (rng.random((n, n)) < density), 1)
    return ising((J + J.T) / 2, rng.normal(scale=0.3, size=n))


def tree_qubo(seed, n=10):
    r = np.random.default_rng(seed)
    Q = np.zeros((n, n))
    Q[np.diag_indices(n)] = r.normal(size=n)
    for v in range(1, n):
        Q[r.integers(v), v] = r.normal()
    return Qubo.from_dense(Q)


# -- brute force ----------------------------------------------------------------------

def test_brute_single_variable():
    assert brute_force(Qubo.from_dense(np.array([[1.0]]))).x.tolist() == [0]


def test_brute_tie_break_is_lexicographic():
    # ferromagnetic pair, no fields: 00 and 11 tie
    q = from_spins(ising([[0, -0.5], [-0.5, 0]], [0, 0]))
    assert brute_force(q).x.tolist() == [0, 0]


def test_brute_orders_agree_16():
    rng = np.random.default_rng(16)
    q = Qubo.from_dense(np.triu(rng.normal(size=(16, 16))))
    a, b = brute_force(q), brute_force_gray(q)
    assert a.x.tolist() == b.x.tolist()
    assert a.energy == pytest.approx(b.energy, abs=1e-9)


def test_brute_size_cap():
    with pytest.raises(TooLargeError):
        brute_force(Qubo.from_dense(np.zeros((27, 27))))


# -- simulated annealing ----------------------------------------------------------------

def test_sa_independent_spins():
    h = np.array([0.5, -1.0, 2.0, -0.1])
    res = sa_solve(ising(np.zeros((4, 4)), h), SaParams(steps=2000), rng=0)
    assert bits_to_spins(res.x).tolist() == (-np.sign(h)).astype(int).tolist()


def test_sa_tree_ensemble():
    q = tree_qubo(3, 12)
    best = brute_force(q).energy
    model = to_ising(q)
    hits = sum(abs(sa_solve(model, SaParams(steps=10_000), rng=s).energy - best) <= 1e-9 for s in range(20))
    assert hits >= 18


def test_sa_single_step_moves_at_most_one_spin():
    model = random_sparse_ising(1)
    s0 = np.ones(16, dtype=np.int8)
    res = sa_solve(model, SaParams(steps=1), s0=s0, rng=0)
    assert np.sum(bits_to_spins(res.x) != s0) <= 1


def test_sa_deterministic_and_monotone_trace():
    model = random_sparse_ising(2)
    a = sa_solve(model, SaParams(steps=3000), rng=7)
    b = sa_solve(model, SaParams(steps=3000), rng=7)
    assert a.x.tolist() == b.x.tolist()
    assert np.all(np.diff(a.best_trace) <= 1e-12)


def test_sa_bad_params():
    with pytest.raises(ValueError):
        SaParams(steps=0)


# -- IBP --------------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_ibp_tree_exact(seed):
    q = tree_qubo(seed)
    assert ibp_solve(q, IbpParams(beta=20.0, sweeps=20), rng=seed).energy == pytest.approx(
        brute_force(q).energy, abs=1e-9)


def test_ibp_dense_graph_uses_tiny_trees():
    rng = np.random.default_rng(6)
    q = Qubo.from_dense(np.triu(rng.normal(size=(6, 6))))
    adj = q.adjacency()
    for s in range(20):
        order, _ = sample_tree(adj, np.random.default_rng(s))
        assert len(order) <= 2
    best = brute_force(q).energy
    hits = sum(abs(ibp_solve(q, IbpParams(beta=5.0, sweeps=50), rng=s).energy - best) <= 1e-9 for s in range(20))
    assert hits >= 15


def test_ibp_single_variable_boltzmann():
    beta, a = 1.7, 0.6
    bp = TreeBP(np.zeros((1, 1)), np.array([a]), [0], {0: -1}, np.zeros(1), beta)
    bp.run()
    p = bp.marginals()[0]
    z = 1 + math.exp(-beta * a)
    assert p == pytest.approx([1 / z, math.exp(-beta * a) / z], abs=1e-12)


def test_ibp_messages_normalised():
    q = tree_qubo(9)
    Q = q.dense()
    S = Q + Q.T
    np.fill_diagonal(S, 0)
    order, parent = sample_tree(q.adjacency(), np.random.default_rng(0))
    bp = TreeBP(S, np.diag(Q), order, parent, np.zeros(q.n), 3.0)
    bp.run()
    for m in bp.messages().values():
        assert m.sum() == pytest.approx(1.0, abs=1e-12)


def test_ibp_trace_non_increasing():
    rng = np.random.default_rng(11)
    q = Qubo.from_dense(np.triu(rng.normal(size=(14, 14)) * (rng.random((14, 14)) < 0.3)))
    res = ibp_solve(q, IbpParams(beta=(0.5, 10.0), sweeps=40), rng=1)
    assert np.all(np.diff(res.best_trace) <= 1e-12)


# -- CACm -------------------------------------------------------------------------------

def test_cacm_decoupled_spins():
    h = np.array([1.0, -0.5, 0.25])
    res = cacm_solve(ising(np.zeros((3, 3)), h), rng=0)
    assert bits_to_spins(res.x).tolist() == (-np.sign(h)).astype(int).tolist()


def test_cacm_ferromagnet_aligns():
    res = cacm_solve(ising([[0, -1.0], [-1.0, 0]], [0, 0]), rng=3)
    s = bits_to_spins(res.x)
    assert s[0] == s[1]


def test_cacm_tuned_sparse_ensemble():
    # theta is DAS-tuned on seeds 100-103, then scored on 20 unseen seeds
    model = random_sparse_ising(4)
    best = brute_force(from_spins(model)).energy
    base = CacmParams()

    def params(v):
        return base.with_values(**{**v, "T": int(round(v["T"]))})

    def cost(v):
        return np.mean([cacm_solve(model, params(v), rng=100 + r).energy for r in range(4)])

    st = DasState.create(CACM_SPECS, {s.name: getattr(base, s.name) for s in CACM_SPECS}, spread=0.3, seed=0)
    tuned = params(tune(st, cost, 20).values())
    hits = sum(abs(cacm_solve(model, tuned, rng=s).energy - best) <= 1e-9 for s in range(20))
    assert hits >= 15


def test_cacm_deterministic():
    model = random_sparse_ising(5)
    a = cacm_solve(model, CacmParams(T=300), rng=2)
    b = cacm_solve(model, CacmParams(T=300), rng=2)
    assert a.x.tolist() == b.x.tolist()
    assert np.all(np.diff(a.best_trace) <= 1e-12)


def test_cacm_bad_params():
    with pytest.raises(ValueError):
        CacmParams(T=0)


# -- QAOA -------------------------------------------------------------------------------

def test_qaoa_zero_hamiltonian_stays_one_hot():
    q = Qubo.from_dense(np.zeros((3, 3)))
    for p in (1, 2, 4):
        res = qaoa_solve(q, [[0, 1, 2]], QaoaParams(p=p, shots=200), rng=p)
        for bits, _, _ in res.info["samples"]:
            assert bits.count("1") == 1


def test_qaoa_p1_angles():
    g, b = ramp(1)
    assert g.tolist() == [0.5] and b.tolist() == [0.5]
    g, b = ramp(4)
    assert g[0] == 0 and g[-1] == 1
    assert np.allclose(b, 1 - g)


def test_qaoa_modal_sample_is_restricted_optimum():
    rng = np.random.default_rng(0)
    Q = np.triu(rng.normal(scale=0.1, size=(6, 6)))
    Q[1, 4] -= 3.0          # favour qubit 1 in group A with qubit 4 in group B
    q = Qubo.from_dense(Q)
    groups = [[0, 1, 2], [3, 4, 5]]
    res = qaoa_solve(q, groups, QaoaParams(p=3, shots=1024), rng=1)
    e = basis_energies(q)
    mask = subspace_mask(6, groups)
    target = int(np.flatnonzero(mask)[np.argmin(e[mask])])
    modal = max(res.info["samples"], key=lambda r: r[1])[0]
    assert int(modal[::-1], 2) == target


def test_qaoa_leakage_free_with_free_qubits():
    rng = np.random.default_rng(3)
    q = Qubo.from_dense(np.triu(rng.normal(size=(7, 7))))
    psi, _, _ = statevector(q, [[0, 2], [3, 5, 6]], 3)
    assert leakage(psi, 7, [[0, 2], [3, 5, 6]]) <= 1e-12
    assert np.sum(np.abs(psi) ** 2) == pytest.approx(1.0)


def test_qaoa_rejects_bad_groups_and_size():
    q = Qubo.from_dense(np.zeros((3, 3)))
    with pytest.raises(QaoaError):
        qaoa_solve(q, [[0, 1], [1, 2]])
    with pytest.raises(QaoaError):
        qaoa_solve(Qubo.from_dense(np.zeros((21, 21))), [[0]])
    with pytest.raises(QaoaError):
        QaoaParams(p=0)


def test_spin_bit_round_trip():
    x = np.array([0, 1, 1, 0], dtype=np.int8)
    assert spins_to_bits(bits_to_spins(x)).tolist() == x.tolist()
