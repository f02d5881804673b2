"""Command-line surface: run, eikonal, correct, compare.

All subcommands are deterministic; identical inputs produce byte-identical
output files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .beckmann import CorrectionProblem, pd_solve
from .eikonal import solve_eikonal, velocity_from_potential
from .errors import CrowdFlowError
from .grid import ScalarField
from .output import (
    read_density_csv,
    write_comparison_csv,
    write_density_csv,
    write_metrics_csv,
    write_pgm,
)
from .scenario_io import parse_scenario
from .simulator import compare_runs, run


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_run(args):
    scenario = parse_scenario(args.scenario)
    snapshots = run(scenario)
    out = _ensure_dir(args.out)
    write_metrics_csv(snapshots, os.path.join(out, "metrics.csv"))
    for snap in snapshots:
        stem = os.path.join(out, f"density_{snap.step:05d}")
        write_density_csv(snap.rho, stem + ".csv")
        write_pgm(snap.rho, stem + ".pgm")
    final = snapshots[-1].metrics
    print(f"steps={snapshots[-1].step} final_mass={final['total_mass']:.6g} "
          f"outflux={final['door_outflux_cum']:.6g} max_density={final['max_density']:.6g}")
    return 0


def _cmd_eikonal(args):
    scenario = parse_scenario(args.scenario)
    sol = solve_eikonal(scenario.grid, scenario.boundary, scenario.f, scenario.pd)
    out = _ensure_dir(args.out)
    write_density_csv(sol.phi, os.path.join(out, "phi.csv"))
    top = float(sol.phi.values.max())
    scaled = ScalarField(sol.phi.values / top if top > 0 else sol.phi.values, scenario.grid)
    write_pgm(scaled, os.path.join(out, "phi.pgm"))
    velocity = velocity_from_potential(sol, scenario.boundary)
    vcx = 0.5 * (velocity.x[:-1, :] + velocity.x[1:, :])
    vcy = 0.5 * (velocity.y[:, :-1] + velocity.y[:, 1:])
    print(f"converged={sol.converged} iterations={sol.iterations} "
          f"max_phi={top:.6g} max_speed={float(np.hypot(vcx, vcy).max()):.6g}")
    return 0 if sol.converged else 3


def _cmd_correct(args):
    scenario = parse_scenario(args.scenario)
    rho = read_density_csv(args.density, h=scenario.grid.h)
    if rho.grid.m != scenario.grid.m or rho.grid.n != scenario.grid.n:
        raise CrowdFlowError(
            f"density file is {rho.grid.m}x{rho.grid.n}, scenario grid is "
            f"{scenario.grid.m}x{scenario.grid.n}")
    problem = CorrectionProblem(
        rho_tilde=ScalarField(rho.values, scenario.grid),
        weight_k=scenario.k,
        tau=scenario.tau,
        boundary=scenario.boundary,
        mode=scenario.mode,
        eta_x=scenario.eta_x,
        eta_y=scenario.eta_y,
    )
    result = pd_solve(problem, scenario.pd)
    out = _ensure_dir(args.out)
    write_density_csv(result.rho, os.path.join(out, "corrected.csv"))
    write_density_csv(result.pressure, os.path.join(out, "pressure.csv"))
    comp = result.comp
    print(f"converged={result.converged} iterations={result.iterations} gap={result.gap:.3e} "
          f"constraint_res={comp.constraint_res:.3e} sign_comp={comp.sign_comp:.3e} "
          f"dual_feas={comp.dual_feas:.3e}")
    return 0 if result.converged else 3


def _cmd_compare(args):
    a = parse_scenario(args.scenario_a)
    b = parse_scenario(args.scenario_b)
    report = compare_runs(a, b)
    out = _ensure_dir(args.out)
    write_comparison_csv(report, os.path.join(out, "comparison.csv"))
    print(f"final_mass_a={report.final_mass_a:.6g} final_mass_b={report.final_mass_b:.6g} "
          f"max_linf_diff={float(report.linf_diff.max()):.6g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="crowdflow",
        description="Macroscopic congested crowd motion simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the prediction-correction loop of a scenario")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.set_defaults(func=_cmd_run)

    p_eik = sub.add_parser("eikonal", help="solve only the travel-cost potential")
    p_eik.add_argument("scenario")
    p_eik.add_argument("--out", default="out")
    p_eik.set_defaults(func=_cmd_eikonal)

    p_cor = sub.add_parser("correct", help="project a density file onto admissible densities")
    p_cor.add_argument("scenario")
    p_cor.add_argument("--density", required=True, help="density CSV to correct")
    p_cor.add_argument("--out", default="out")
    p_cor.set_defaults(func=_cmd_correct)

    p_cmp = sub.add_parser("compare", help="run two scenarios and report difference series")
    p_cmp.add_argument("scenario_a")
    p_cmp.add_argument("scenario_b")
    p_cmp.add_argument("--out", default="out")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CrowdFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
