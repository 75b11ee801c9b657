"""Acceptance gates: one test per criterion, names state the claim.

The campaign-backed criteria share module-scoped batches so the whole
file stays in the minutes range: the per-scenario K sweeps (25 cases
per node count) back criteria 4, 5, and 6, and the 50-case scenario-1
batch at K = 30 backs criteria 3 and 7.  All campaigns run from fixed
seeds; the constraint and statistics checks are deterministic, only
wall-clock runtimes vary between machines.
"""
from __future__ import annotations

import os
import time

import numpy as np
import pytest
from numpy.random import default_rng

from stctraj.dynamics import ControlSetParams, QuadModel, discretize_foh, propagate_dense
from stctraj.harness import CampaignSpec, run_campaign
from stctraj.scenarios import BoundaryConditions, NonconvexProblem
from stctraj.scvx import solve_scvx
from stctraj.stc import TriggerMode, compound_value, implication_holds, slack_witness

WORKERS = min(2, os.cpu_count() or 1)

# node-constraint tolerances for converged cases (harness invariants)
NODE_TOL = {"thrust": 1e-6, "tilt": 1e-6, "speed": 1e-6, "boundary": 1e-6,
            "payload": 1e-4, "containment": 1e-4}


@pytest.fixture(scope="module")
def s1_sweep():
    spec = CampaignSpec(scenario=1, K_list=(15, 20, 25, 30), cases_per_K=25, seed=0)
    return run_campaign(spec, workers=WORKERS)


@pytest.fixture(scope="module")
def s2_sweep():
    spec = CampaignSpec(scenario=2, K_list=(15, 20, 25, 30), cases_per_K=25, seed=0)
    return run_campaign(spec, workers=WORKERS)


@pytest.fixture(scope="module")
def s1_batch50():
    spec = CampaignSpec(scenario=1, K_list=(30,), cases_per_K=50, seed=0)
    return run_campaign(spec, workers=WORKERS).batches[0]


def _medians_cm(result):
    return [
        100.0 * float(np.median([r.clipping for r in b.converged]))
        for b in result.batches
    ]


def test_criterion_1_stc_equivalence_100k_tuples_per_form():
    t0 = time.perf_counter()
    rng = default_rng(2026)
    n = 100_000

    def with_kinks(shape):
        vals = rng.uniform(-1.0, 1.0, shape)
        mask = rng.random(shape) < 0.02
        vals[mask] = 0.0  # land exactly on the trigger/constraint boundary
        return vals

    # scalar form: one trigger, one constraint, h <= 0 vs the implication
    g = with_kinks((n, 1))
    c = with_kinks((n, 1))
    algebraic = compound_value(g, c, 0.0, TriggerMode.AND) <= 0.0
    logical = implication_holds(g, c, TriggerMode.AND)
    scalar_mismatch = int(np.sum(algebraic != logical))

    # And-compound: three triggers, one constraint
    g3 = with_kinks((n, 3))
    algebraic = compound_value(g3, c, 0.0, TriggerMode.AND) <= 0.0
    logical = implication_holds(g3, c, TriggerMode.AND)
    and_mismatch = int(np.sum(algebraic != logical))

    # Or-compound equality form: the slack witness must zero the product
    # exactly when some disjunct is satisfied
    g2 = with_kinks((n, 2))
    c3 = with_kinks((n, 3))
    or_mismatch = 0
    for i in range(n):
        alpha = slack_witness(c3[i])
        if alpha is None:
            # no nonnegative alpha can zero the product: h = 0 is only
            # satisfiable when every trigger is dormant
            satisfiable = float(np.sum(-np.minimum(0.0, g2[i]))) == 0.0
        else:
            assert np.all(alpha >= 0.0)
            satisfiable = compound_value(g2[i], c3[i], alpha, TriggerMode.OR) == 0.0
        or_mismatch += satisfiable != bool(
            implication_holds(g2[i], c3[i], TriggerMode.OR)
        )

    elapsed = time.perf_counter() - t0
    assert scalar_mismatch == 0, f"{scalar_mismatch} scalar-form mismatches"
    assert and_mismatch == 0, f"{and_mismatch} And-form mismatches"
    assert or_mismatch == 0, f"{or_mismatch} Or-form mismatches"
    assert elapsed < 10.0, f"equivalence suite took {elapsed:.1f} s (budget 10 s)"


def test_criterion_2_foh_matches_dense_propagation_1000_maps():
    t0 = time.perf_counter()
    rng = default_rng(7)
    worst = 0.0
    for k_d in (0.0, 0.1, 0.5):
        model = QuadModel(k_d=k_d)
        for _ in range(1000):
            dt = rng.uniform(0.05, 1.0)
            dyn = discretize_foh(model, dt, 2)
            x0 = rng.standard_normal(6)
            u0 = model.hover_control() + rng.standard_normal(3)
            u1 = model.hover_control() + rng.standard_normal(3)
            x_step = dyn.step(x0, u0, u1)
            x_dense = propagate_dense(model, x0, u0, u1, dt, 2)[-1]
            rel = float(np.max(np.abs(x_step - x_dense))
                        / max(1.0, float(np.max(np.abs(x_dense)))))
            worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9, f"worst relative one-step error {worst:.2e}"
    assert elapsed < 30.0, f"oracle took {elapsed:.1f} s (budget 30 s)"


def test_criterion_3_scenario1_campaign_converges_and_validates(s1_batch50):
    batch = s1_batch50
    rate = batch.n_converged / len(batch.results)
    assert rate >= 0.90, (
        f"{batch.n_converged}/{len(batch.results)} converged ({100 * rate:.0f}%)"
    )
    for r in batch.converged:
        assert r.iterations <= 20 * (1 + r.retries)
        for key, val in r.violations.items():
            assert val <= NODE_TOL[key], (
                f"case {r.attempt}: {key} violation {val:.2e}"
            )
    median_cm = 100.0 * float(np.median([r.clipping for r in batch.converged]))
    assert median_cm <= 10.0, f"median clipping {median_cm:.2f} cm"


def test_criterion_4_median_clipping_non_increasing_in_k(s1_sweep, s2_sweep):
    for result in (s1_sweep, s2_sweep):
        meds = _medians_cm(result)
        assert all(a >= b for a, b in zip(meds, meds[1:])), (
            f"scenario {result.spec.scenario} medians {meds} cm not monotone"
        )


def test_criterion_5_runtime_grows_with_k_and_single_solve_is_interactive(
    s1_sweep, s1_batch50
):
    means = [b.runtime_stats()[0] for b in s1_sweep.batches]
    assert all(a < b for a, b in zip(means, means[1:])), (
        f"mean runtimes {['%.0f' % m for m in means]} ms not increasing"
    )
    slowest = max(r.final_solve_time for r in s1_batch50.converged)
    assert slowest < 1.0, f"slowest K=30 solve {slowest:.2f} s"


def test_criterion_6_scenario2_campaign_payload_and_containment(s2_sweep):
    batch = s2_sweep.batches[-1]
    assert batch.K == 30
    rate = batch.n_converged / len(batch.results)
    assert rate >= 0.85, (
        f"{batch.n_converged}/{len(batch.results)} converged ({100 * rate:.0f}%)"
    )
    for r in batch.converged:
        assert r.violations["payload"] <= 1e-4, (
            f"case {r.attempt}: payload length off by {r.violations['payload']:.2e}"
        )
        assert r.violations["containment"] <= 1e-4, (
            f"case {r.attempt}: containment depth {r.violations['containment']:.2e}"
        )
    median_cm = 100.0 * float(np.median([r.clipping for r in batch.converged]))
    assert median_cm <= 5.0, f"median clipping {median_cm:.2f} cm"


def test_criterion_7_thrust_magnitude_tight_on_every_converged_case(s1_batch50):
    worst = 0.0
    for r in s1_batch50.converged:
        tr = r.trajectory
        gap = np.abs(np.linalg.norm(tr.u, axis=1) - tr.gamma[:, 0])
        worst = max(worst, float(np.max(gap)))
    assert worst <= 1e-6, f"worst ||u_k|| vs gamma_k gap {worst:.2e}"


def test_criterion_8_hover_fuel_matches_closed_form():
    model = QuadModel()
    bcs = BoundaryConditions(
        r_i=np.zeros(3), r_f=np.zeros(3), t_f=4.0, v_max=2.0
    )
    problem = NonconvexProblem(
        scenario=1, model=model, control=ControlSetParams(), bcs=bcs, K=30
    )
    traj, report = solve_scvx(problem)
    assert report.converged
    fuel_ref = model.m * model.g * bcs.t_f  # 13.7340 N*s
    assert fuel_ref == pytest.approx(13.7340)
    assert abs(traj.fuel - fuel_ref) / fuel_ref <= 1e-6, (
        f"hover fuel {traj.fuel:.6f} vs {fuel_ref:.6f}"
    )


def test_criterion_9_campaign_statistics_identical_across_worker_counts():
    spec = CampaignSpec(scenario=1, K_list=(15,), cases_per_K=3, seed=11)
    seq = run_campaign(spec, workers=1)
    par = run_campaign(spec, workers=2)
    assert par.manifest() == seq.manifest()
    assert par.clipping_table() == seq.clipping_table()
    # wall-clock runtime tables carry measurements, not decisions; their
    # shape is deterministic even though the timings are not
    assert len(par.runtime_table().splitlines()) == len(seq.runtime_table().splitlines())
