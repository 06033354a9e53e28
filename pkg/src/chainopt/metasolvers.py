"""Hybrid meta-solvers: PBS-subtree refinement (IQTS) and the bilevel portfolio (HBS)."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .informed import _level_order, isf, isg, isi
from .qubo import Qubo, QuboModel, to_ising
from .solution import Solution
from .solvers import (CacmParams, IbpParams, QaoaParams, SaParams, brute_force, cacm_solve,
                      ibp_solve, qaoa_solve, sa_solve)
from .solvers.base import SolverResult
from .solvers.qaoa import QaoaError
from .tuning import DasState, ParamSpec, das_sample, das_update


# -- sub-problems ------------------------------------------------------------

@dataclass
class SubProblem:
    qubo: Qubo
    indices: np.ndarray           # model indices of the sub-problem variables, ascending
    groups: list[list[int]]       # one-hot groups in local indices

    def embed(self, x_full, x_sub) -> np.ndarray:
        out = np.array(x_full, dtype=np.int8)
        out[self.indices] = x_sub
        return out


def build_subproblem(model_or_qubo, incumbent, selected, groups=None) -> SubProblem:
    """QUBO over ``selected`` with every other variable clamped to ``incumbent``.

    The clamped couplings become linear terms and the clamped-only part goes to
    the offset, so ``E_sub(x_sel) == E_full(incumbent with x_sel)``.
    """
    q = model_or_qubo if isinstance(model_or_qubo, Qubo) else model_or_qubo.qubo
    sel = np.unique(np.asarray(selected, dtype=np.int64))
    if sel.size == 0:
        raise ValueError("empty variable selection")
    x = np.asarray(incumbent, dtype=float)
    rest = np.ones(q.n, dtype=bool)
    rest[sel] = False
    Q = q.matrix.tocsr()
    xr = np.where(rest, x, 0.0)
    lin = np.asarray(Q[sel] @ xr).ravel() + np.asarray(Q.T.tocsr()[sel] @ xr).ravel()
    sub = Q[sel][:, sel].tocoo()
    diag = np.zeros(sel.size)
    np.add.at(diag, sub.row[sub.row == sub.col], sub.data[sub.row == sub.col])
    off = sub.row != sub.col
    offset = q.offset + float(xr @ (Q @ xr))
    sq = Qubo.from_terms(sel.size, offset, diag + lin, sub.row[off], sub.col[off], sub.data[off])
    local = {int(v): t for t, v in enumerate(sel)}
    gl = []
    for g in groups or ():
        if all(int(v) in local for v in g):
            gl.append([local[int(v)] for v in g])
    return SubProblem(sq, sel, gl)


# -- IQTS --------------------------------------------------------------------

@dataclass(frozen=True)
class IqtsConfig:
    m: int = 4                  # subtree size
    n: int = 15                 # sub-problem variable budget
    kappa: int = 50             # number of part steps
    sub_solver: str = "sa"      # "qaoa" | "sa" | "brute_force"
    isf_budget: int = 20
    isi_iterations: int = 10
    zero_rest: bool = False     # clamp the unselected subtree variables to 0 instead of the incumbent
    sa_steps: int = 1000
    qaoa_p: int = 3
    qaoa_shots: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.kappa < 1:
            raise ValueError("m, n and kappa must be >= 1")
        if self.sub_solver not in ("qaoa", "sa", "brute_force"):
            raise ValueError(f"unknown sub-solver {self.sub_solver!r}")


def _random_subtree(model: QuboModel, root: str, m: int, rng) -> list[str]:
    inst = model.instance
    nodes = [root]
    frontier = set(inst.children[root])
    if inst.part_by_id[root].parent is not None:
        frontier.add(inst.part_by_id[root].parent)
    while frontier and len(nodes) < m:
        cand = sorted(frontier)
        nxt = cand[rng.integers(len(cand))]
        nodes.append(nxt)
        frontier.discard(nxt)
        nb = set(inst.children[nxt])
        if inst.part_by_id[nxt].parent is not None:
            nb.add(inst.part_by_id[nxt].parent)
        frontier |= nb - set(nodes)
    return nodes


def select_variables(model: QuboModel, parts, budget: int, x, rng) -> tuple[list[int], list[list[int]]]:
    """Whole (part, source) one-hot groups of ``parts`` while they fit into ``budget``.

    If not even the first group fits, a random slice of it containing its
    current one is taken instead.
    """
    by_part = {}
    for p, _, idx in model.layout.one_hot_groups():
        by_part.setdefault(p, []).append([int(i) for i in idx])
    groups = [g for p in parts for g in by_part.get(p, [])]
    chosen, used = [], 0
    for g in groups:
        if used + len(g) <= budget:
            chosen.append(g)
            used += len(g)
    if chosen:
        return [i for g in chosen for i in g], chosen
    if not groups:
        return [], []
    g = groups[0]
    on = [i for i in g if x[i]]
    others = [i for i in g if not x[i]]
    rng.shuffle(others)
    pick = (on + others)[:budget]
    return pick, []


def _solve_sub(sub: SubProblem, cfg: IqtsConfig, x0, rng) -> tuple[np.ndarray, str | None]:
    try:
        if cfg.sub_solver == "brute_force":
            return brute_force(sub.qubo).x, None
        if cfg.sub_solver == "qaoa":
            return qaoa_solve(sub.qubo, sub.groups, QaoaParams(cfg.qaoa_p, cfg.qaoa_shots), rng).x, None
    except (QaoaError, ValueError) as exc:
        flag = f"{cfg.sub_solver} failed ({exc}); fell back to SA"
    else:
        flag = None
    res = sa_solve(to_ising(sub.qubo), SaParams(cfg.sa_steps), 2 * np.asarray(x0, dtype=np.int8) - 1, rng)
    return res.x, flag


def iqts_solve(model: QuboModel, cfg: IqtsConfig = IqtsConfig()) -> tuple[Solution, list[dict]]:
    """Refine an ISG start by re-solving small PBS-subtree sub-problems.

    ``cfg.kappa`` part steps are taken, cycling through the parts deepest
    level first.  A step is kept when the repaired and improved result is no
    worse than the incumbent.
    """
    rng = np.random.default_rng(cfg.seed)
    best = isg(model, rng)
    trace = [{"step": 0, "part": None, "objective": best.objective, "accepted": True, "flag": ""}]
    order: list[str] = []
    groups_all = [list(map(int, g)) for _, _, g in model.layout.one_hot_groups()]
    for step in range(1, cfg.kappa + 1):
        if not order:
            order = _level_order(model, rng, deepest_first=True)
        part = order.pop(0)
        subtree = _random_subtree(model, part, cfg.m, rng)
        sel, _ = select_variables(model, subtree, cfg.n, best.x, rng)
        flag = ""
        accepted = False
        if sel:
            base = best.x.copy()
            if cfg.zero_rest:
                for g in groups_all:
                    if any(i in sel for i in g):
                        continue
                    base[g] = 0
            sub = build_subproblem(model, base, sel, groups_all)
            xs, f = _solve_sub(sub, cfg, base[sub.indices], rng)
            flag = f or ""
            cand = isf(model, sub.embed(base, xs), cfg.isf_budget, rng)
            if cand is not None and cfg.isi_iterations:
                cand = isi(model, cand.x, cfg.isi_iterations, 0.5, rng)
            if cand is not None and cand.objective <= best.objective + 1e-12:
                accepted = True
                best = cand
        trace.append({"step": step, "part": part, "objective": best.objective,
                      "accepted": accepted, "flag": flag})
    return best, trace


# -- HBS ---------------------------------------------------------------------

CACM_SPECS = (
    ParamSpec("lam1", -1.0, 4.0), ParamSpec("lam2", 0.0, 16.0), ParamSpec("gamma", 0.0, 1.0),
    ParamSpec("beta", 1e-3, 32.0, log=True), ParamSpec("xi", 1e-2, 100.0, log=True),
    ParamSpec("a", 0.05, 1.5), ParamSpec("T", 20, 5000, log=True),
)
IBP_SPECS = (ParamSpec("beta", 1e-2, 100.0, log=True),)


@dataclass(frozen=True)
class HbsConfig:
    solvers: tuple[str, ...] = ("cacm", "ibp")
    population: int = 8
    max_iterations: int = 250
    window: int = 25
    samples: int = 4                 # DAS samples per solver and iteration
    # penalty-dominated models favour strong feedback and a saturating target amplitude
    cacm_start: dict = field(default_factory=lambda: {"lam1": 1.0, "lam2": 8.0, "gamma": 0.2, "beta": 8.0,
                                                      "xi": 3.0, "a": 0.7, "T": 300})
    ibp_start: dict = field(default_factory=lambda: {"beta": 2.0})
    ibp_sweeps: int = 100
    qaoa_p: int = 3
    qaoa_shots: int = 256
    qaoa_qubits: int = 20
    isf_budget: int = 20
    workers: int = 1                 # threads for the solver runs of one iteration
    seed: int = 0

    def __post_init__(self):
        if not self.solvers or any(s not in ("cacm", "ibp", "qaoa") for s in self.solvers):
            raise ValueError("enabled solvers must be a non-empty subset of cacm, ibp, qaoa")
        if self.population < 1:
            raise ValueError("population must be >= 1")


def merge_population(states, energies, size: int, rng) -> tuple[list, np.ndarray]:
    """Uniform draw of ``size`` members among the lowest-energy ones (ties at the cut included)."""
    energies = np.asarray(energies, dtype=float)
    order = np.argsort(energies, kind="stable")
    cut = energies[order[min(size, len(order)) - 1]]
    pool = np.flatnonzero(energies <= cut + 1e-12)
    pick = rng.choice(pool, size=min(size, pool.size), replace=False)
    return [states[i] for i in pick], energies[pick]


def _heaviside_cost(H, H_star, tau):
    return 1.0 / (1.0 + math.exp(-max(min((H - H_star) / tau, 700.0), -700.0)))


def hbs_solve(model: QuboModel, cfg: HbsConfig = HbsConfig()) -> tuple[Solution, list[dict]]:
    """Bilevel portfolio: DAS-tuned solvers refine a population that ISF keeps feasible."""
    rng = np.random.default_rng(cfg.seed)
    ising, qubo = model.ising, model.qubo
    seeds = [isg(model, rng) for _ in range(cfg.population)]
    pop = [s.x.copy() for s in seeds]
    best = min(seeds, key=lambda s: s.objective)
    H_star = best.objective
    das = {}
    if "cacm" in cfg.solvers:
        das["cacm"] = DasState.create(CACM_SPECS, cfg.cacm_start, spread=0.2, R=cfg.samples,
                                      seed=int(rng.integers(2**31)))
    if "ibp" in cfg.solvers:
        das["ibp"] = DasState.create(IBP_SPECS, cfg.ibp_start, spread=0.3, R=cfg.samples,
                                     seed=int(rng.integers(2**31)))
    groups_all = [list(map(int, g)) for _, _, g in model.layout.one_hot_groups()]
    trace = [{"iteration": 0, "H": H_star, "Q": best.objective,
              "theta": {k: v.values() for k, v in das.items()}, "flag": ""}]

    def run(job):
        name, theta, start, seed = job
        jrng = np.random.default_rng(seed)
        if name == "cacm":
            p = CacmParams(theta["lam1"], theta["lam2"], theta["gamma"], theta["beta"],
                           theta["xi"], theta["a"], max(1, int(round(theta["T"]))))
            return cacm_solve(ising, p, 2 * start.astype(np.int8) - 1, jrng)
        if name == "ibp":
            return ibp_solve(qubo, IbpParams(theta["beta"], cfg.ibp_sweeps), start, jrng)
        sel, _ = select_variables(model, theta, cfg.qaoa_qubits, start, jrng)
        if not sel:
            return None
        sub = build_subproblem(model, start, sel, groups_all)
        try:
            res = qaoa_solve(sub.qubo, sub.groups, QaoaParams(cfg.qaoa_p, cfg.qaoa_shots), jrng)
        except QaoaError:
            return None
        x = sub.embed(start, res.x)
        return SolverResult(x, qubo.energy(x))

    pool_exec = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    stale = 0
    for it in range(1, cfg.max_iterations + 1):
        batches = {name: das_sample(state) for name, state in das.items()}
        jobs = [(name, theta, pop[int(rng.integers(len(pop)))], int(rng.integers(2**63)))
                for name, batch in batches.items() for theta in batch.values]
        if "qaoa" in cfg.solvers:
            root = model.layout.parts[int(rng.integers(len(model.layout.parts)))]
            parts = _random_subtree(model, root, len(model.layout.parts), rng)
            jobs.append(("qaoa", parts, pop[int(rng.integers(len(pop)))], int(rng.integers(2**63))))
        results = list(pool_exec.map(run, jobs) if pool_exec else map(run, jobs))
        cands, energies = [], []
        for name, batch in batches.items():
            costs = [r.energy for (n_, *_), r in zip(jobs, results) if n_ == name]
            tau = max(float(np.std(costs)), 1e-9 * (1.0 + abs(H_star)))
            das[name] = das_update(das[name], batch, [_heaviside_cost(h, H_star, tau) for h in costs])
        for r in results:
            if r is not None and np.isfinite(r.energy):
                cands.append(np.asarray(r.x, dtype=np.int8))
                energies.append(float(r.energy))
        if not cands:
            trace.append({"iteration": it, "H": math.nan, "Q": best.objective,
                          "theta": {k: v.values() for k, v in das.items()}, "flag": "skipped"})
            stale += 1
            if stale >= cfg.window:
                break
            continue
        H_iter = min(energies) if energies else math.inf
        pool = pop + cands
        pool_e = [qubo.energy(x) for x in pop] + energies
        merged, _ = merge_population(pool, pool_e, cfg.population, rng)
        repaired = []
        for x in merged:
            sol = isf(model, x, cfg.isf_budget, rng)
            if sol is not None:
                repaired.append(sol)
        improved = False
        for sol in repaired:
            if sol.objective < best.objective - 1e-12:
                best, improved = sol, True
        H_star = min(H_star, best.objective)
        if repaired:
            pop = [s.x.copy() for s in repaired]
            while len(pop) < cfg.population:
                pop.append(pop[int(rng.integers(len(pop)))].copy())
        trace.append({"iteration": it, "H": H_iter, "Q": best.objective,
                      "theta": {k: v.values() for k, v in das.items()}, "flag": ""})
        stale = 0 if improved else stale + 1
        if stale >= cfg.window:
            break
    if pool_exec:
        pool_exec.shutdown()
    return best, trace


def manifest(config, seed: int, solution: Solution, traces: dict[str, str]) -> str:
    """Run manifest: echoed configuration, seed, trace file names and the final solution."""
    cfg = asdict(config) if hasattr(config, "__dataclass_fields__") else dict(config)
    return json.dumps({"config": cfg, "seed": seed, "traces": traces, "solution": solution.to_dict()},
                      indent=1, sort_keys=True, default=float) + "\n"
