"""Command-line front end: single solves, campaigns, file validation.

Subcommands:
  solve     solve one configured case, writing trajectory and report files
  campaign  run Monte-Carlo campaigns, writing statistics tables + manifest
  validate  check a config file without solving anything
  replay    recheck a saved trajectory against its configuration

Exit codes: 0 success, 2 validation error, 3 convergence failure,
4 backend (subproblem solver) failure.  File formats are documented in
FORMATS.md.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .fileio import (
    ConfigError,
    TrajectoryFormatError,
    build_campaign_specs,
    build_problem,
    build_scvx_config,
    load_config,
    read_trajectory,
    write_trajectory,
)
from .harness import (
    clipping_scenario1,
    clipping_scenario2,
    containment_violation,
    node_violations,
    run_campaign,
)
from .scvx import solve_scvx

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_BACKEND = 4

# harness invariants for converged trajectories, by violation key
_REPLAY_TOL = {
    "thrust": 1e-6,
    "tilt": 1e-6,
    "speed": 1e-6,
    "boundary": 1e-6,
    "payload": 1e-4,
    "containment": 1e-4,
}


def _apply_overrides(doc, args):
    """Fold --k/--tf into the parsed config before building anything."""
    if getattr(args, "k", None) is not None:
        if doc.solver is None:
            raise ConfigError("--k needs a [solver] section to override")
        doc = replace(doc, solver=replace(doc.solver, k=args.k))
    if getattr(args, "tf", None) is not None:
        if doc.boundary is None:
            raise ConfigError("--tf needs a [boundary] section to override")
        doc = replace(doc, boundary=replace(doc.boundary, t_f=args.tf))
    return doc


def _out_prefix(args) -> str:
    return args.out if args.out is not None else Path(args.config).stem


def _clipping(problem, traj, dense_samples: int = 50) -> float:
    if problem.scenario == 1:
        return clipping_scenario1(
            traj, problem.hoop, dense_samples=dense_samples, model=problem.model
        )
    return clipping_scenario2(
        traj, problem.beam, dense_samples=dense_samples, model=problem.model
    )


def cmd_solve(args) -> int:
    doc = _apply_overrides(load_config(args.config), args)
    problem = build_problem(doc)
    cfg = build_scvx_config(doc, problem)
    traj, report = solve_scvx(problem, cfg=cfg)

    prefix = _out_prefix(args)
    traj_path = f"{prefix}.traj.txt"
    report_path = f"{prefix}.report.txt"
    write_trajectory(
        traj_path, traj, report,
        model=problem.model, dense_samples=args.emit_dense or 0,
    )
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.serialize())

    print(f"converged {'true' if report.converged else 'false'}")
    print(f"iterations {report.iteration_count}")
    print(f"retries {report.retries}")
    print(f"t_f {report.t_f!r}")
    if report.converged:
        print(f"fuel {traj.fuel!r}")
        print(f"clipping {_clipping(problem, traj)!r}")
    print(f"wrote {traj_path}")
    print(f"wrote {report_path}")
    if report.converged:
        return EXIT_OK
    print(f"failure: {report.message}", file=sys.stderr)
    return EXIT_BACKEND if report.failure_kind == "backend" else EXIT_NO_CONVERGENCE


def cmd_campaign(args) -> int:
    doc = load_config(args.config)
    specs = build_campaign_specs(doc, seed=args.seed)
    prefix = _out_prefix(args)

    stats_blocks = []
    manifest_blocks = []
    for spec in specs:
        result = run_campaign(spec, workers=args.workers)
        stats_blocks += [result.runtime_table(), result.clipping_table()]
        manifest_blocks.append(result.manifest())
        print(result.summary())

    stats_path = f"{prefix}.stats.txt"
    manifest_path = f"{prefix}.manifest.txt"
    with open(stats_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(stats_blocks))
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest_blocks))
    print(f"wrote {stats_path}")
    print(f"wrote {manifest_path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    doc = load_config(args.config)
    solve_sections = (doc.model, doc.control, doc.scenario, doc.boundary, doc.solver)
    checked = False
    if any(s is not None for s in solve_sections):
        problem = build_problem(doc)  # raises ConfigError on partial sections
        print(
            f"solve config ok: scenario {problem.scenario}, "
            f"{problem.n_vehicles} vehicle(s), K {problem.K}"
        )
        checked = True
    if doc.campaign is not None:
        specs = build_campaign_specs(doc)
        scen = ", ".join(str(s.scenario) for s in specs)
        print(
            f"campaign config ok: scenario(s) {scen}, "
            f"K_list {list(doc.campaign.k_list)}, "
            f"{doc.campaign.cases_per_k} cases per K"
        )
        checked = True
    if not checked:
        raise ConfigError("config has no solve sections and no [campaign] section")
    return EXIT_OK


def cmd_replay(args) -> int:
    doc = load_config(args.config)
    traj, header, _ = read_trajectory(args.trajectory)
    if doc.scenario is None:
        raise ConfigError("replay needs a config with a [scenario] section")
    if doc.scenario_number != header["scenario"]:
        raise ConfigError(
            f"trajectory is for scenario {header['scenario']}, "
            f"config describes scenario {doc.scenario_number}"
        )
    if doc.solver is None or doc.boundary is None:
        raise ConfigError("replay needs [solver] and [boundary] sections")
    if not traj.converged:
        print("trajectory did not converge; nothing to recheck", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    # rebuild the problem at the file's node count and final time
    doc = replace(
        doc,
        solver=replace(doc.solver, k=traj.K),
        boundary=replace(doc.boundary, t_f=traj.t_f),
    )
    problem = build_problem(doc)
    violations = node_violations(problem, traj)
    if problem.scenario == 2:
        violations["containment"] = containment_violation(problem, traj)

    ok = True
    for key, value in violations.items():
        tol = _REPLAY_TOL[key]
        good = value <= tol
        ok = ok and good
        print(f"{key} {value:.3e} {'ok' if good else f'exceeds {tol:.0e}'}")
    print(f"clipping {_clipping(problem, traj)!r}")
    if ok:
        print("trajectory re-validates")
        return EXIT_OK
    print("trajectory violates node constraints", file=sys.stderr)
    return EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stctraj",
        description="trajectory optimization with state-triggered go/no-go decisions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one configured case")
    p_solve.add_argument("config")
    p_solve.add_argument("--out", help="output path prefix (default: config stem)")
    p_solve.add_argument("--k", type=int, help="override [solver] k")
    p_solve.add_argument("--tf", type=float, help="override [boundary] t_f")
    p_solve.add_argument(
        "--emit-dense", type=int, default=0, metavar="N",
        help="write a dense track with N samples per interval",
    )
    p_solve.set_defaults(func=cmd_solve)

    p_camp = sub.add_parser("campaign", help="run Monte-Carlo campaigns")
    p_camp.add_argument("config")
    p_camp.add_argument("--out", help="output path prefix (default: config stem)")
    p_camp.add_argument("--workers", type=int, default=1)
    p_camp.add_argument("--seed", type=int, help="override [campaign] seed")
    p_camp.set_defaults(func=cmd_campaign)

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_rep = sub.add_parser("replay", help="recheck a saved trajectory")
    p_rep.add_argument("config")
    p_rep.add_argument("trajectory")
    p_rep.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TrajectoryFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
