"""Static SVG figures: pairwise KPI projections and workshare bars.

Output is byte-stable: the SVG id salt is fixed and no date is written.
"""

from __future__ import annotations

import json
from itertools import combinations
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import read_results  # noqa: E402
from .pareto import KpiPoint, pareto_filter, projected_pareto  # noqa: E402

KPI_LABELS = ("C1 emissions", "C2 cost", "C3 transport time", "C4 workshare deviation")
_RC = {"svg.hashsalt": "chainopt", "svg.fonttype": "path", "font.size": 9}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _placeholder(path: Path, message: str) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.axis("off")
        ax.text(0.5, 0.5, message, ha="center", va="center")
        return _save(fig, path)


def kpi_scatter(points, out_dir, prefix: str = "pareto") -> list[Path]:
    """One SVG per KPI pair.

    Points on the 4-D front are filled, points only optimal in the projection
    get an open marker, and dominated points are small grey dots.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = list(points)
    front = {p.solution_id for p in pareto_filter(points)}
    paths = []
    for a, b in combinations(range(1, 5), 2):
        path = out_dir / f"{prefix}_c{a}_c{b}.svg"
        if not points:
            paths.append(_placeholder(path, "no feasible results"))
            continue
        proj = {p.solution_id for p in projected_pareto(points, (a, b))}
        with plt.rc_context(_RC):
            fig, ax = plt.subplots(figsize=(4, 3.2))
            groups = (
                ("dominated", lambda p: p.solution_id not in front and p.solution_id not in proj,
                 dict(s=10, c="0.65", marker=".")),
                ("projection optimal", lambda p: p.solution_id in proj and p.solution_id not in front,
                 dict(s=30, facecolors="none", edgecolors="tab:orange", marker="o")),
                ("Pareto optimal", lambda p: p.solution_id in front,
                 dict(s=30, c="tab:blue", marker="o")),
            )
            for label, keep, style in groups:
                sel = [p for p in points if keep(p)]
                if sel:
                    ax.scatter([p.kpis[a - 1] for p in sel], [p.kpis[b - 1] for p in sel], label=label, **style)
            ax.set_xlabel(KPI_LABELS[a - 1])
            ax.set_ylabel(KPI_LABELS[b - 1])
            ax.legend(loc="best", frameon=False)
            fig.tight_layout()
            paths.append(_save(fig, path))
    return paths


def workshare_bars(solution: dict, instance: dict, path) -> Path:
    """Site and supplier workshare (percent) against their windows and targets."""
    path = Path(path)
    ws = solution.get("workshare")
    if not ws:
        return _placeholder(path, "no workshare data")
    sites = {s["id"]: s for s in instance["sites"]}
    sups = {u["id"]: u for u in instance["suppliers"]}
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(7, 3), sharey=True)
        for ax, title, loads, meta in ((axes[0], "sites", ws["sites"], sites),
                                       (axes[1], "suppliers", ws["suppliers"], sups)):
            names = sorted(loads)
            xs = range(len(names))
            ax.bar(xs, [loads[n] for n in names], color="tab:blue", width=0.6)
            for x, n in zip(xs, names):
                lo, hi = meta[n]["ws_min"], meta[n]["ws_max"]
                ax.hlines([lo, hi], x - 0.35, x + 0.35, colors=["tab:green", "tab:red"], linewidth=1.5)
                if "ws_target" in meta[n]:
                    ax.plot([x], [meta[n]["ws_target"]], marker="D", color="black", markersize=4)
            ax.set_xticks(list(xs), names, rotation=45, ha="right")
            ax.set_title(title)
        axes[0].set_ylabel("workshare [%]")
        fig.tight_layout()
        return _save(fig, path)


def emit_plots(run_dir, out_dir=None) -> list[Path]:
    """All figures for a run directory: six KPI projections and one workshare chart per solution."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir else run_dir / "plots"
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = read_results(run_dir / "results.csv") if (run_dir / "results.csv").exists() else []
    points = [KpiPoint(tuple(float(r[f"C{n}"]) for n in range(1, 5)), f"run_{int(r['run_id']):04d}")
              for r in rows if r["feasible"] == "1"]
    paths = kpi_scatter(points, out_dir)
    inst_path = run_dir / "instance.json"
    if inst_path.exists():
        instance = json.loads(inst_path.read_text())
        for p in points:
            sol_path = run_dir / "solutions" / f"{p.solution_id}.json"
            if sol_path.exists():
                paths.append(workshare_bars(json.loads(sol_path.read_text()), instance,
                                            out_dir / f"workshare_{p.solution_id}.svg"))
    return paths
