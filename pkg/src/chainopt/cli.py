"""Command-line entry point: ``chainopt {generate,compile,solve,sweep,pareto,plot}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .instance import GenerationError, InstanceError, generate_synthetic, load_instance, save_instance
from .metasolvers import HbsConfig, IqtsConfig, hbs_solve, iqts_solve, manifest
from .pareto import REFERENCE, points_to_csv
from .preprocess import reduce_instance
from .qubo import ModelError, Multipliers, compile_model, export_model


def _floats(n):
    def parse(text):
        vals = [float(v) for v in text.split(",")]
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
        return tuple(vals)
    return parse


def _reference(text):
    return None if text == "auto" else _floats(4)(text)


def _add_generator(p):
    g = p.add_argument_group("synthetic instance (used when --instance is absent)")
    g.add_argument("--parts", type=int, default=20)
    g.add_argument("--sites", type=int, default=4)
    g.add_argument("--suppliers", type=int, default=3)
    g.add_argument("--warehouses", type=int, default=2)
    g.add_argument("--regions", type=int, default=2)
    g.add_argument("--density", type=float, default=0.5, help="transport edge density in (0, 1]")
    g.add_argument("--alpha", type=float, default=0.8, help="primary source share")
    g.add_argument("--instance-seed", type=int, default=42)


def _generator(args) -> dict:
    return dict(n_parts=args.parts, n_sites=args.sites, n_suppliers=args.suppliers,
                n_warehouses=args.warehouses, n_regions=args.regions, edge_density=args.density,
                alpha=args.alpha, seed=args.instance_seed)


def _add_model(p):
    p.add_argument("--instance", help="instance JSON (otherwise a synthetic one is generated)")
    _add_generator(p)
    p.add_argument("--weights", type=_floats(4), default=(0.25,) * 4, help="w1,w2,w3,w4 summing to 1")
    p.add_argument("--multipliers", type=_floats(6), default=(2.0,) * 6, help="six penalty multipliers")
    p.add_argument("--R", type=int, default=10, help="value denominator")
    p.add_argument("--Rbar", type=int, default=5, help="share denominator")


def _add_solver(p):
    p.add_argument("--solver", choices=ex.SOLVERS, default="iqts")
    p.add_argument("--m", type=int, default=4, help="IQTS subtree size")
    p.add_argument("--n", type=int, default=15, help="IQTS sub-problem variables")
    p.add_argument("--kappa", type=int, default=50, help="IQTS part steps")
    p.add_argument("--sub-solver", choices=("sa", "qaoa", "brute_force"), default="sa")
    p.add_argument("--hbs-solvers", default="cacm,ibp", help="comma list from cacm, ibp, qaoa")
    p.add_argument("--population", type=int, default=8)
    p.add_argument("--iterations", type=int, default=250, help="HBS iteration cap")
    p.add_argument("--seed", type=int, default=0)


def _solver_config(args) -> dict:
    if args.solver == "iqts":
        return {"m": args.m, "n": args.n, "kappa": args.kappa, "sub_solver": args.sub_solver}
    return {"solvers": tuple(args.hbs_solvers.split(",")), "population": args.population,
            "max_iterations": args.iterations}


def _instance(args):
    return load_instance(args.instance) if args.instance else generate_synthetic(**_generator(args))


def _model(args):
    return compile_model(reduce_instance(_instance(args)), args.weights, Multipliers(args.multipliers),
                         R=args.R, Rbar=args.Rbar)


# -- commands ---------------------------------------------------------------------

def cmd_generate(args):
    inst = generate_synthetic(**_generator(args))
    save_instance(inst, args.out)
    print(f"wrote {args.out} ({len(inst.parts)} parts, {len(inst.feasible)} feasible options)")


def cmd_compile(args):
    model = _model(args)
    coo, meta = export_model(model, args.out)
    lay = model.layout
    print(f"N_y={lay.N_y} N_z={lay.N_z} N_x={lay.N_x}; wrote {coo} and {meta}")


def cmd_solve(args):
    model = _model(args)
    cfg_dict = {**_solver_config(args), "seed": args.seed}
    if args.solver == "iqts":
        cfg = IqtsConfig(**cfg_dict)
        sol, trace = iqts_solve(model, cfg)
    else:
        cfg = HbsConfig(**cfg_dict)
        sol, trace = hbs_solve(model, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "solution.json").write_text(sol.to_json() + "\n")
    (out / "trace.csv").write_text(ex.trace_to_csv(trace))
    (out / "manifest.json").write_text(manifest(cfg, args.seed, sol, {"trace": "trace.csv"}))
    kpis = " ".join(f"C{n + 1}={v:.4g}" for n, v in enumerate(sol.kpis))
    print(f"objective={sol.objective:.6g} feasible={sol.feasible} {kpis}")


def cmd_sweep(args):
    if args.manifest:
        summary = ex.rerun(args.manifest, args.out)
    else:
        spec = ex.ExperimentSpec(
            output=args.out, mode=args.mode, solver=args.solver, solver_config=_solver_config(args),
            instance=args.instance, generator=None if args.instance else _generator(args),
            weights=args.weights, grid_step=args.grid_step, samples=args.samples,
            alpha_range=(args.alpha_min, args.alpha_max), multipliers=args.multipliers,
            R=args.R, Rbar=args.Rbar, reference=args.reference, seed=args.seed)
        summary = ex.run_experiment(spec)
    print(f"{summary['rows']} rows, {summary['feasible_rows']} feasible, "
          f"{summary['points']} Pareto points, hypervolume {summary['hypervolume']:.6g}")


def cmd_pareto(args):
    front, hv = ex.front_from_results(args.results, args.reference)
    text = points_to_csv(front)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"{len(front)} Pareto points, hypervolume {hv:.6g}", file=sys.stderr)


def cmd_plot(args):
    from .plots import emit_plots
    paths = emit_plots(args.run_dir, args.out)
    print(f"wrote {len(paths)} SVG files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainopt", description="Supply-chain assignment optimisation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic instance")
    _add_generator(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("compile", help="compile an instance to a QUBO and export it")
    _add_model(p)
    p.add_argument("--out", required=True, help="output path stem for .coo and .json")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("solve", help="run IQTS or HBS on one weight vector")
    _add_model(p)
    _add_solver(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="weight grid, random weights or share sweep")
    _add_model(p)
    _add_solver(p)
    p.add_argument("--mode", choices=ex.MODES, default="weight_grid")
    p.add_argument("--grid-step", default="1/10", help="weight grid step, e.g. 0.1 or 1/3")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--alpha-min", type=float, default=0.5)
    p.add_argument("--alpha-max", type=float, default=0.8)
    p.add_argument("--reference", type=_reference, default=REFERENCE, help="r1,r2,r3,r4 or 'auto'")
    p.add_argument("--manifest", help="re-run the experiment recorded in this manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pareto", help="Pareto front and hypervolume of a results.csv")
    p.add_argument("results")
    p.add_argument("--reference", type=_reference, default=REFERENCE, help="r1,r2,r3,r4 or 'auto'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("plot", help="SVG figures for a sweep directory")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (InstanceError, GenerationError, ModelError, ex.ExperimentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
