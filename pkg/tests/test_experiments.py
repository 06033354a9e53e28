import filecmp
import json
from fractions import Fraction

import numpy as np
import pytest

from chainopt.experiments import (ExperimentError, ExperimentSpec, front_from_results, plan, read_results, rerun,
                                  run_experiment, share_samples, trace_to_csv, weight_grid)
from chainopt.pareto import hypervolume

GEN = dict(n_parts=8, n_sites=4, n_suppliers=3, n_warehouses=2, n_regions=2, edge_density=0.5, alpha=0.8, seed=42)


def test_half_step_grid_has_ten_rows():
    grid = weight_grid(0.5)
    h = Fraction(1, 2)
    expected = {p for p in [(1, 0, 0, 0), (h, h, 0, 0)] for p in _perms(p)}
    assert len(grid) == 10 and set(grid) == expected


def _perms(t):
    import itertools
    return set(itertools.permutations(t))


def test_tenth_grid_size_and_sums():
    grid = weight_grid(0.1)
    assert len(grid) == 286
    assert all(sum(w) == 1 for w in grid)


@pytest.mark.parametrize("step", [0, 0.3, 1.5])
def test_bad_grid_step(step):
    with pytest.raises(ExperimentError):
        weight_grid(step)


def test_share_samples_in_range():
    for num, den in share_samples(200, np.random.default_rng(0)):
        assert 0.5 <= num / den <= 0.8


def test_alpha_sweep_plan_is_deterministic(tmp_path):
    spec = ExperimentSpec(output=str(tmp_path), mode="alpha_sweep", samples=5, generator=GEN, seed=11)
    a, b = plan(spec), plan(spec)
    assert a == b and len(a) == 5
    assert all(r.alpha_spec.endswith(f"/{r.Rbar}") for r in a)
    other = plan(ExperimentSpec(output=str(tmp_path), mode="alpha_sweep", samples=5, generator=GEN, seed=12))
    assert [r.alpha_spec for r in other] != [r.alpha_spec for r in a] or [r.seed for r in other] != [r.seed for r in a]


def test_grid_weights_are_exact_text(tmp_path):
    spec = ExperimentSpec(output=str(tmp_path), mode="weight_grid", grid_step="1/3", generator=GEN)
    rows = plan(spec)
    assert len(rows) == 20
    assert ("1/3", "1/3", "1/3", "0") in [r.weights for r in rows]


def test_spec_validation(tmp_path):
    with pytest.raises(ExperimentError):
        ExperimentSpec(output=str(tmp_path))
    with pytest.raises(ExperimentError):
        ExperimentSpec(output=str(tmp_path), generator=GEN, mode="everything")
    with pytest.raises(ExperimentError):
        ExperimentSpec(output=str(tmp_path), generator=GEN, solver="gurobi")


def test_spec_dict_round_trip(tmp_path):
    spec = ExperimentSpec(output=str(tmp_path), generator=GEN, reference=None, solver_config={"kappa": 3})
    assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


@pytest.fixture(scope="module")
def grid_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    spec = ExperimentSpec(output=str(out), mode="weight_grid", grid_step="1/2", generator=GEN, solver="iqts",
                          solver_config={"kappa": 4, "sub_solver": "brute_force"}, seed=1)
    return out, run_experiment(spec)


def test_pipeline_hypervolume_self_consistent(grid_run):
    out, summary = grid_run
    front, hv = front_from_results(out / "results.csv")
    assert hv == pytest.approx(summary["hypervolume"], abs=1e-12)
    assert [p.solution_id for p in front] == summary["ids"]
    assert summary["rows"] == 10


def test_run_directory_contents(grid_run):
    out, summary = grid_run
    rows = read_results(out / "results.csv")
    assert len(rows) == 10 and all(r["wall_ms"] == "" for r in rows)
    assert len(list((out / "traces").iterdir())) == 10
    feasible = [r for r in rows if r["feasible"] == "1"]
    assert len(list((out / "solutions").iterdir())) >= len(feasible)
    sol = json.loads((out / "solutions" / "run_0000.json").read_text())
    assert sum(sol["workshare"]["suppliers"].values()) == pytest.approx(100.0, abs=1.0)
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["rows"]) == 10


def test_rerun_is_byte_identical(grid_run, tmp_path):
    out, _ = grid_run
    rerun(out / "manifest.json", tmp_path / "again")
    for name in ("results.csv", "pareto.csv", "pareto.json", "instance.json"):
        assert filecmp.cmp(out / name, tmp_path / "again" / name, shallow=False), name


def test_auto_reference_covers_points(tmp_path):
    spec = ExperimentSpec(output=str(tmp_path), mode="single", generator=GEN, reference=None,
                          solver_config={"kappa": 2})
    summary = run_experiment(spec)
    assert summary["points"] == 1 and summary["hypervolume"] > 0
    assert hypervolume([(0, 0, 0, 0)], summary["reference"]) == pytest.approx(np.prod(summary["reference"]))


def test_failed_rows_are_recorded(tmp_path):
    spec = ExperimentSpec(output=str(tmp_path), mode="single", generator=GEN, multipliers=(2, 2, 2, 2, 2, 2),
                          solver_config={"kappa": 2, "sub_solver": "annealer"})
    summary = run_experiment(spec)
    assert summary["feasible_rows"] == 0
    assert "annealer" in (tmp_path / "timings.csv").read_text()
    assert read_results(tmp_path / "results.csv")[0]["feasible"] == "0"


def test_trace_csv_flattens_theta():
    text = trace_to_csv([{"iteration": 0, "H": 1.0, "theta": {"ibp": {"beta": 2.0}}, "flag": ""}])
    assert text.splitlines() == ["iteration,H,flag,ibp.beta", "0,1.0,,2.0"]
