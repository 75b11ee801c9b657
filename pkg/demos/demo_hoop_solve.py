"""Solve one randomized hoop-traversal case and inspect the result.

A single quad-rotor climbs from the origin to a point six meters up.
Somewhere in between sits a randomly placed, randomly tilted hoop; the
go/no-go decision of whether (and where) to thread it is left to the
state-triggered corridor constraint, not to any discrete planner.

Usage: python demo_hoop_solve.py [seed]
"""
import sys

import numpy as np
from numpy.random import default_rng

from stctraj.harness import (
    build_case,
    clipping_scenario1,
    node_violations,
    sample_scenario1,
)
from stctraj.scvx import solve_scvx


def main(seed=0, K=30):
    rng = default_rng(seed)
    spec, bcs = sample_scenario1(rng, K=K)
    print(f"hoop center  {np.array2string(spec.center, precision=3)}")
    print(f"hoop normal  {np.array2string(spec.normal, precision=3)}")
    print(f"corridor     half-length {spec.l_c}, radius {spec.rho_c}")
    print(f"grid         K = {K}, t_f = {bcs.t_f}, v_max = {bcs.v_max:.3f}")
    print()

    problem = build_case(1, K, default_rng(seed))
    traj, report = solve_scvx(problem)
    print(f"converged    {report.converged} "
          f"({report.iteration_count} iterations, {report.retries} retries)")
    for i, rec in enumerate(report.iterations):
        print(f"  iter {i:2d}  J = {rec.J:10.4f}  J_tr = {rec.J_tr:.3e}  "
              f"J_vc = {rec.J_vc:.3e}")
    if not report.converged:
        print(f"giving up: {report.message}")
        return 1

    print()
    print(f"fuel         {traj.fuel:.4f} N*s")
    clip = clipping_scenario1(traj, spec)
    print(f"clipping     {100 * clip:.2f} cm of worst-case corridor miss")
    print("node-constraint slop (zero is exact):")
    for key, val in node_violations(problem, traj).items():
        print(f"  {key:8s} {val:.3e}")

    # where the crossing happens: the node nearest the hoop plane
    rel = traj.x[:, :3] - spec.center
    axial = rel @ spec.normal
    k_cross = int(np.argmin(np.abs(axial)))
    lateral = np.linalg.norm(rel[k_cross] - axial[k_cross] * spec.normal)
    print(f"closest node to the hoop plane: k = {k_cross}, "
          f"axial {axial[k_cross]:+.3f}, lateral {lateral:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main(int(sys.argv[1]) if len(sys.argv) > 1 else 0))
