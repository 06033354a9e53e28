"""Trade the four KPIs off against each other with a coarse weight grid.

Every weight vector on the 1/3 simplex grid gets its own IQTS run. The script
then prints the non-dominated set and writes SVG scatter plots. Output goes to
``demo_sweep/`` in the current directory.
"""

from pathlib import Path

from chainopt import ExperimentSpec, run_experiment
from chainopt.experiments import front_from_results
from chainopt.plots import emit_plots

out = Path("demo_sweep")
spec = ExperimentSpec(
    output=str(out), mode="weight_grid", grid_step="1/3",
    generator=dict(n_parts=10, n_sites=4, n_suppliers=3, n_warehouses=2, n_regions=2,
                   edge_density=0.5, alpha=0.8, seed=7),
    solver="iqts", solver_config={"kappa": 20}, reference=None, seed=0,
)
summary = run_experiment(spec)
print(f"{summary['rows']} weight vectors, {summary['feasible_rows']} feasible")

front, hv = front_from_results(out / "results.csv", summary["reference"])
print(f"{len(front)} non-dominated solutions, hypervolume {hv:.4g} "
      f"against reference {tuple(round(r, 3) for r in summary['reference'])}")
for p in front:
    w = ", ".join(f"{x:.2f}" for x in p.weights)
    c = ", ".join(f"{x:.3f}" for x in p.kpis)
    print(f"  {p.solution_id}  weights ({w})  KPIs ({c})")

paths = emit_plots(out)
print(f"wrote {len(paths)} figures under {out / 'plots'}")
