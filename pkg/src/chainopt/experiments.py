"""Batch experiments: weight grids, random weights and share sweeps with reproducible outputs.

A run directory holds

* ``results.csv``  one row per weight vector or share sample,
* ``timings.csv``  wall-clock time and error text per row,
* ``traces/``      per-row solver traces,
* ``solutions/``   per-row solutions with workshare loads,
* ``pareto.csv`` / ``pareto.json``  the non-dominated feasible rows and their hypervolume,
* ``manifest.json`` the full experiment description plus derived seeds.

Everything except ``timings.csv`` is a pure function of the manifest.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np

from .instance import ProblemInstance, generate_synthetic, load_instance, to_dict as instance_to_dict
from .metasolvers import HbsConfig, IqtsConfig, hbs_solve, iqts_solve
from .pareto import REFERENCE, KpiPoint, hypervolume, nadir_reference, pareto_filter, points_to_csv
from .preprocess import reduce_instance
from .qubo import Multipliers, compile_model
from .qubo.evaluate import workshare_units
from .solution import check_assignment

log = logging.getLogger(__name__)

MODES = ("weight_grid", "weight_random", "alpha_sweep", "single")
SOLVERS = ("iqts", "hbs")
RESULT_COLUMNS = ["run_id", "mode", "w1", "w2", "w3", "w4", "alpha_spec", "solver", "seed", "feasible",
                  "C1", "C2", "C3", "C4", "objective", "wall_ms"]
SHARE_DENOMINATORS = (2, 3, 5, 10, 15, 20, 25, 30, 50, 100)


class ExperimentError(ValueError):
    pass


# -- weight sets ---------------------------------------------------------------

def weight_grid(step) -> list[tuple[Fraction, ...]]:
    """All 4-part compositions of 1 with parts in multiples of ``step`` (exact fractions).

    ``step`` may be a float such as 0.1 or a Fraction; ``1/step`` must be an integer.
    """
    step = Fraction(step).limit_denominator(10**6)
    if step <= 0 or step > 1 or (1 / step).denominator != 1:
        raise ExperimentError(f"grid step {step} does not divide 1")
    m = int(1 / step)
    out = []
    # stars and bars: bar positions among m + 3 slots
    for bars in combinations(range(m + 3), 3):
        counts = np.diff((-1, *bars, m + 3)) - 1
        out.append(tuple(Fraction(int(c), m) for c in counts))
    return sorted(out, reverse=True)


def weight_random(count: int, rng) -> list[tuple[float, ...]]:
    """Uniform samples from the 4-simplex."""
    w = rng.dirichlet(np.ones(4), size=count)
    return [tuple(float(v) for v in row) for row in w]


def share_samples(count: int, rng, lo: float = 0.5, hi: float = 0.8) -> list[tuple[int, int]]:
    """(numerator, denominator) pairs: denominator from a fixed list, numerator uniform in [lo, hi]."""
    out = []
    for _ in range(count):
        den = int(rng.choice(SHARE_DENOMINATORS))
        num = int(rng.integers(math.ceil(lo * den), math.floor(hi * den) + 1))
        out.append((num, den))
    return out


# -- specification ---------------------------------------------------------------

@dataclass
class ExperimentSpec:
    output: str
    mode: str = "single"
    solver: str = "iqts"
    solver_config: dict = field(default_factory=dict)
    instance: str | None = None            # path to an instance JSON
    generator: dict | None = None          # or generate_synthetic keyword arguments
    weights: tuple[float, ...] = (0.25, 0.25, 0.25, 0.25)   # single and alpha_sweep
    grid_step: str = "1/10"
    samples: int = 10
    alpha_range: tuple[float, float] = (0.5, 0.8)
    multipliers: tuple[float, ...] = (2.0,) * 6
    R: int = 10
    Rbar: int = 5
    reference: tuple[float, ...] | None = REFERENCE    # None: nadir of the feasible rows + 10%
    seed: int = 0

    def __post_init__(self):
        if (self.instance is None) == (self.generator is None):
            raise ExperimentError("give exactly one of an instance path or generator parameters")
        if self.mode not in MODES:
            raise ExperimentError(f"mode must be one of {MODES}")
        if self.solver not in SOLVERS:
            raise ExperimentError(f"solver must be one of {SOLVERS}")
        if len(self.weights) != 4:
            raise ExperimentError("weights need four entries")
        if self.samples < 1:
            raise ExperimentError("samples must be >= 1")
        self.weights = tuple(float(w) for w in self.weights)
        self.multipliers = tuple(float(v) for v in self.multipliers)
        self.alpha_range = tuple(float(v) for v in self.alpha_range)
        if self.reference is not None:
            self.reference = tuple(float(v) for v in self.reference)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        for key in ("weights", "multipliers", "alpha_range", "reference"):
            if key in data and data[key] is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    def load_instance(self) -> ProblemInstance:
        if self.instance is not None:
            return load_instance(self.instance)
        return generate_synthetic(**self.generator)


@dataclass(frozen=True)
class Row:
    run_id: int
    weights: tuple[str, ...]     # exact text of each weight
    alpha_spec: str
    Rbar: int
    seed: int


def plan(spec: ExperimentSpec) -> list[Row]:
    """The rows of an experiment with their derived seeds."""
    rng = np.random.default_rng([spec.seed, 1])
    alphas = [("instance", spec.Rbar)]
    if spec.mode == "weight_grid":
        ws = [tuple(str(v) for v in w) for w in weight_grid(Fraction(spec.grid_step))]
    elif spec.mode == "weight_random":
        ws = [tuple(repr(v) for v in w) for w in weight_random(spec.samples, rng)]
    else:
        ws = [tuple(repr(v) for v in spec.weights)]
    if spec.mode == "alpha_sweep":
        alphas = [(f"{num}/{den}", den) for num, den in share_samples(spec.samples, rng, *spec.alpha_range)]
        ws = ws * len(alphas)
    else:
        alphas = alphas * len(ws)
    seeds = np.random.SeedSequence(spec.seed).generate_state(len(ws), dtype=np.uint32)
    return [Row(i, w, a, rb, int(s)) for i, (w, (a, rb), s) in enumerate(zip(ws, alphas, seeds))]


def _weights(texts) -> tuple[float, ...]:
    vals = [float(Fraction(t)) for t in texts]
    total = math.fsum(vals)
    return tuple(v / total for v in vals)


def solve_row(spec: ExperimentSpec, inst: ProblemInstance, row: Row) -> dict:
    """Compile and solve one row; never raises."""
    t0 = time.perf_counter()
    out = {"row": row, "ok": False, "error": "", "trace": [], "solution": None}
    try:
        if row.alpha_spec != "instance":
            inst = inst.with_alpha(float(Fraction(row.alpha_spec)))
        reduced = reduce_instance(inst)
        model = compile_model(reduced, _weights(row.weights), Multipliers(spec.multipliers),
                              R=spec.R, Rbar=row.Rbar)
        if spec.solver == "iqts":
            sol, trace = iqts_solve(model, IqtsConfig(**{**spec.solver_config, "seed": row.seed}))
        else:
            sol, trace = hbs_solve(model, HbsConfig(**{**spec.solver_config, "seed": row.seed}))
        problems = check_assignment(reduced, sol.assignment, R=spec.R, Rbar=row.Rbar) if sol.feasible else []
        if problems:
            raise ExperimentError("solution failed the independent check: " + "; ".join(problems))
        site, sup = workshare_units(model, model.layout.expand(sol.x))
        scale = spec.R * row.Rbar
        out.update(ok=True, trace=trace, solution={
            **sol.to_dict(),
            "workshare": {"sites": {k: v / scale for k, v in sorted(site.items())},
                          "suppliers": {k: v / scale for k, v in sorted(sup.items())}},
        })
    except Exception as exc:   # recorded as a failed row
        out["error"] = f"{type(exc).__name__}: {exc}"
    out["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return out


def _solve_job(args):
    spec_dict, inst_dict, row = args
    from .instance import from_dict
    return solve_row(ExperimentSpec.from_dict(spec_dict), from_dict(inst_dict), row)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CHAINOPT_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(v) -> str:
    return repr(float(v))


def trace_to_csv(trace) -> str:
    buf = io.StringIO()
    if trace:
        keys = [k for k in trace[0] if k != "theta"]
        theta_keys = sorted({f"{s}.{n}" for t in trace for s, d in t.get("theta", {}).items() for n in d})
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys + theta_keys)
        for t in trace:
            flat = {f"{s}.{n}": v for s, d in t.get("theta", {}).items() for n, v in d.items()}
            w.writerow([_cell(t[k]) for k in keys] + [_cell(flat.get(k, "")) for k in theta_keys])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> dict:
    """Execute ``spec`` and write the run directory; returns the Pareto summary."""
    out = Path(spec.output)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "solutions").mkdir(exist_ok=True)
    inst = spec.load_instance()
    rows = plan(spec)
    workers = workers or worker_count()
    jobs = [(spec.to_dict(), instance_to_dict(inst), r) for r in rows]
    if workers > 1 and len(rows) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_solve_job, jobs))
    else:
        results = [solve_row(spec, inst, r) for r in rows]

    res_buf, tim_buf = io.StringIO(), io.StringIO()
    res_w = csv.writer(res_buf, lineterminator="\n")
    tim_w = csv.writer(tim_buf, lineterminator="\n")
    res_w.writerow(RESULT_COLUMNS)
    tim_w.writerow(["run_id", "wall_ms", "error"])
    points = []
    for r in results:
        row = r["row"]
        sol = r["solution"]
        feasible = bool(sol and sol["feasible"])
        kpis = [sol["kpis"][f"C{n}"] for n in range(1, 5)] if sol else []
        res_w.writerow([row.run_id, spec.mode, *row.weights, row.alpha_spec, spec.solver, row.seed,
                        int(feasible), *(map(_fmt, kpis) if sol else [""] * 4),
                        _fmt(sol["objective"]) if sol else "", ""])
        tim_w.writerow([row.run_id, f"{r['wall_ms']:.1f}", r["error"]])
        name = f"run_{row.run_id:04d}"
        (out / "traces" / f"{name}.csv").write_text(trace_to_csv(r["trace"]))
        if sol:
            (out / "solutions" / f"{name}.json").write_text(json.dumps(sol, indent=1, sort_keys=True) + "\n")
        if feasible:
            points.append(KpiPoint(tuple(kpis), name, _weights(row.weights)))
        if r["error"]:
            log.warning("row %d failed: %s", row.run_id, r["error"])

    (out / "results.csv").write_text(res_buf.getvalue())
    (out / "timings.csv").write_text(tim_buf.getvalue())
    (out / "instance.json").write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")
    front = pareto_filter(points)
    ref = spec.reference if spec.reference is not None else nadir_reference(points)
    summary = {"reference": list(ref), "hypervolume": hypervolume(front, ref),
               "points": len(front), "feasible_rows": len(points), "rows": len(rows),
               "ids": [p.solution_id for p in front]}
    (out / "pareto.csv").write_text(points_to_csv(front))
    (out / "pareto.json").write_text(json.dumps(summary, indent=1) + "\n")
    manifest = {"spec": spec.to_dict(),
                "rows": [{"run_id": r.run_id, "weights": list(r.weights), "alpha_spec": r.alpha_spec,
                          "Rbar": r.Rbar, "seed": r.seed} for r in rows]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return summary


def rerun(manifest_path, output) -> dict:
    """Repeat the experiment recorded in ``manifest_path`` into ``output``."""
    data = json.loads(Path(manifest_path).read_text())
    spec = ExperimentSpec.from_dict({**data["spec"], "output": str(output)})
    return run_experiment(spec)


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def front_from_results(path, reference=REFERENCE) -> tuple[list[KpiPoint], float]:
    """Pareto front and hypervolume recomputed from a results.csv (``reference=None``: nadir + 10%)."""
    pts = [KpiPoint(tuple(float(r[f"C{n}"]) for n in range(1, 5)), f"run_{int(r['run_id']):04d}",
                    _weights([r[f"w{n}"] for n in range(1, 5)]))
           for r in read_results(path) if r["feasible"] == "1"]
    front = pareto_filter(pts)
    return front, hypervolume(front, reference if reference is not None else nadir_reference(pts))
