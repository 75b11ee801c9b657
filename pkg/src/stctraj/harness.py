"""Monte-Carlo campaigns over randomized benchmark cases.

Samples hoop poses and obstacle fields from the benchmark case
distributions, solves each case, validates the hard constraints at the
solved nodes, measures inter-sample constraint clipping on the dense
continuous-time trajectory, and aggregates five-column statistics
tables (mean, median, std, min, max).

Cases are independent, so a campaign can fan out over a process pool.
Each case's rng stream is derived from (seed, scenario, K, attempt
index) alone and the books are kept in attempt order, so any worker
count produces identical results.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSetParams, QuadModel, build_control_cone, propagate_dense
from .scenarios import (
    BeamSpec,
    BoundaryConditions,
    HoopSpec,
    NonconvexProblem,
    assemble_problem,
)
from .scvx import Trajectory, solve_scvx
from .stc import violation_depth

# scenario 1 case distribution: hoop center box (up, east, north), tilt
# about east, heading about up; endpoints and horizon are fixed
HOOP_CENTER_LO = (-1.0, -2.0, 2.0)
HOOP_CENTER_HI = (1.0, 2.0, 4.0)
HOOP_TILT_MAX = math.radians(25.0)
HOOP_HEADING_MAX = math.radians(35.0)
HOOP_L_C = 0.5
SCEN1_R_I = (0.0, 0.0, 0.0)
SCEN1_R_F = (0.0, 0.0, 6.0)
SCEN1_T_F = 4.0

# scenario 2 case distribution: initial formation center box and angle,
# obstacle box, and the fixed final formation
FORMATION_CENTER_LO = (-2.0, 0.0)
FORMATION_CENTER_HI = (2.0, 1.0)
FORMATION_ANGLE_MAX = math.radians(70.0)
OBSTACLE_LO = (-2.0, 2.0)
OBSTACLE_HI = (2.0, 4.5)
N_OBSTACLES = 4
PAYLOAD_L_O = 1.0
KEEPOUT_W_O = 0.43
OBSTACLE_R_O = 0.08
SCEN2_R_F = ((-0.5, 5.5), (0.5, 5.5))
SCEN2_T_F = 4.0
SCEN2_V_MAX = 3.0

# dense samples per interval for the clipping metrics; sub-millimeter
# path resolution at benchmark speeds
DENSE_SAMPLES = 50


def normal_from_angles(phi: float, psi: float) -> np.ndarray:
    """Hoop normal from the tilt/heading angle pair.

    Starting from the corridor axis (north), tilt by phi about the east
    axis, then rotate by psi about the up axis; both rotations follow
    the right-hand rule in the (up, east, north) frame.  Closed form:
    n = (sin phi, -cos phi sin psi, cos phi cos psi).
    """
    return np.array([
        math.sin(phi),
        -math.cos(phi) * math.sin(psi),
        math.cos(phi) * math.cos(psi),
    ])


def sample_scenario1(
    rng: np.random.Generator, K: int = 30
) -> tuple[HoopSpec, BoundaryConditions]:
    """Draw one hoop case from the benchmark distribution.

    The speed bound tracks the grid resolution (v_max = 2 l_c / dt), so
    the node count takes part in the draw.  Endpoints, horizon, and the
    corridor geometry are fixed; center and plane orientation are
    uniform over their boxes.
    """
    center = rng.uniform(HOOP_CENTER_LO, HOOP_CENTER_HI)
    phi = rng.uniform(-HOOP_TILT_MAX, HOOP_TILT_MAX)
    psi = rng.uniform(-HOOP_HEADING_MAX, HOOP_HEADING_MAX)
    hoop = HoopSpec(
        center=center,
        normal=normal_from_angles(phi, psi),
        l_c=HOOP_L_C,
        rho_c=0.0,
        require_passage=True,
    )
    dt = SCEN1_T_F / (K - 1)
    bcs = BoundaryConditions(
        r_i=np.array(SCEN1_R_I),
        r_f=np.array(SCEN1_R_F),
        t_f=SCEN1_T_F,
        v_max=2.0 * HOOP_L_C / dt,
    )
    return hoop, bcs


def min_obstacle_spacing(l_o: float, w_o: float) -> float:
    """Pairwise 1-norm spacing floor: max{0.8 (l_o + 2 w_o), 2 w_o}."""
    return max(0.8 * (l_o + 2.0 * w_o), 2.0 * w_o)


class SamplingBudgetExceeded(RuntimeError):
    """Obstacle rejection sampling stalled; the case should be redrawn."""


def sample_scenario2(
    rng: np.random.Generator, budget: int = 200
) -> tuple[BeamSpec, BoundaryConditions]:
    """Draw one two-vehicle case: formation pose plus obstacle field.

    One obstacle always sits on the segment from the initial to the
    final formation center (clipped to the obstacle box, so it actually
    blocks the nominal route); the rest fill in by rejection sampling
    under the pairwise 1-norm spacing floor.
    """
    center = rng.uniform(FORMATION_CENTER_LO, FORMATION_CENTER_HI)
    angle = rng.uniform(-FORMATION_ANGLE_MAX, FORMATION_ANGLE_MAX)
    axis = np.array([math.cos(angle), math.sin(angle)])
    r_i = np.vstack([
        center - 0.5 * PAYLOAD_L_O * axis,
        center + 0.5 * PAYLOAD_L_O * axis,
    ])
    r_f = np.array(SCEN2_R_F)
    target = 0.5 * (r_f[0] + r_f[1])
    spacing = min_obstacle_spacing(PAYLOAD_L_O, KEEPOUT_W_O)
    # segment parameter window where the blocking obstacle stays inside
    # the obstacle box (the x extent is automatic: both segment ends
    # have x in [-2, 2] and the box spans it)
    t_lo = (OBSTACLE_LO[1] - center[1]) / (target[1] - center[1])
    t_hi = (OBSTACLE_HI[1] - center[1]) / (target[1] - center[1])
    for _ in range(budget):
        points = [center + rng.uniform(t_lo, t_hi) * (target - center)]
        stalled = False
        for _ in range(N_OBSTACLES - 1):
            for _ in range(budget):
                q = rng.uniform(OBSTACLE_LO, OBSTACLE_HI)
                if all(np.abs(q - p).sum() >= spacing for p in points):
                    points.append(q)
                    break
            else:
                stalled = True
                break
        if not stalled:
            beam = BeamSpec(
                l_o=PAYLOAD_L_O,
                w_o=KEEPOUT_W_O,
                obstacles=np.array(points),
                R_o=OBSTACLE_R_O,
            )
            bcs = BoundaryConditions(
                r_i=r_i, r_f=r_f, t_f=SCEN2_T_F, v_max=SCEN2_V_MAX
            )
            return beam, bcs
    raise SamplingBudgetExceeded("obstacle spacing rejection budget exhausted")


def clipping_scenario1(
    traj: Trajectory,
    spec: HoopSpec,
    dense_samples: int = DENSE_SAMPLES,
    model: QuadModel | None = None,
) -> float:
    """Worst lateral miss at the hoop plane along the continuous path.

    Each interval is propagated densely under its FOH control; every
    crossing of the hoop plane (sign change of the axial coordinate
    between consecutive samples) is located by linear interpolation and
    scored as max(0, lateral distance - rho_c).  A passage-required
    trajectory that never crosses the plane is a gross violation: the
    metric falls back to the lateral distance at the closest approach
    to the plane.
    """
    if model is None:
        model = QuadModel()
    n_hat = spec.normal
    dt = traj.dt
    worst = 0.0
    crossed = False
    closest_axial = math.inf
    closest_lateral = 0.0
    for k in range(traj.K - 1):
        xs = propagate_dense(
            model, traj.x[k], traj.u[k], traj.u[k + 1], dt, dense_samples
        )
        ts = traj.times[k] + np.linspace(0.0, dt, dense_samples)
        if spec.center.ndim == 1:
            centers = spec.center[None, :]
        else:
            centers = np.vstack([spec.center_at(t) for t in ts])
        rel = xs[:, :3] - centers
        axial = rel @ n_hat
        lateral = np.linalg.norm(rel - np.outer(axial, n_hat), axis=1)
        i = int(np.argmin(np.abs(axial)))
        if abs(axial[i]) < closest_axial:
            closest_axial = abs(axial[i])
            closest_lateral = float(lateral[i])
        for j in np.flatnonzero(axial == 0.0):
            worst = max(worst, float(lateral[j]) - spec.rho_c)
            crossed = True
        for j in np.flatnonzero(axial[:-1] * axial[1:] < 0.0):
            w = axial[j] / (axial[j] - axial[j + 1])
            rc = rel[j] + w * (rel[j + 1] - rel[j])
            lat = float(np.linalg.norm(rc - (rc @ n_hat) * n_hat))
            worst = max(worst, lat - spec.rho_c)
            crossed = True
    if spec.require_passage and not crossed:
        return closest_lateral
    return max(0.0, worst)


def _point_segment_distance(
    q: np.ndarray, p1: np.ndarray, p2: np.ndarray
) -> np.ndarray:
    """Distance from point q to the segments p1[i] -> p2[i], rowwise."""
    delta = p2 - p1
    denom = np.einsum("ij,ij->i", delta, delta)
    tau = np.einsum("ij,ij->i", q[None, :] - p1, delta)
    tau = np.clip(tau / np.maximum(denom, 1e-300), 0.0, 1.0)
    foot = p1 + tau[:, None] * delta
    return np.linalg.norm(q[None, :] - foot, axis=1)


def clipping_scenario2(
    traj: Trajectory,
    spec: BeamSpec,
    dense_samples: int = DENSE_SAMPLES,
    model: QuadModel | None = None,
) -> float:
    """Worst keep-out penetration of the payload segment over time.

    At each dense sample the payload occupies the segment between the
    two vehicle positions; the metric is the largest
    max(0, w_o - distance(obstacle center, segment)) over samples and
    obstacles.
    """
    if model is None:
        model = QuadModel(spatial_dim=2)
    d = model.spatial_dim
    n_veh = traj.x.shape[1] // model.n_x
    if n_veh != 2:
        raise ValueError("payload clipping needs a two-vehicle trajectory")
    dt = traj.dt
    worst = 0.0
    for k in range(traj.K - 1):
        ends = []
        for v in range(n_veh):
            sx = slice(v * model.n_x, (v + 1) * model.n_x)
            su = slice(v * model.n_u, (v + 1) * model.n_u)
            xs = propagate_dense(
                model, traj.x[k, sx], traj.u[k, su], traj.u[k + 1, su],
                dt, dense_samples,
            )
            ends.append(xs[:, :d])
        p1, p2 = ends
        for obs in spec.obstacles:
            dist = _point_segment_distance(obs, p1, p2)
            worst = max(worst, float(np.max(spec.w_o - dist)))
    return max(0.0, worst)


def node_violations(problem: NonconvexProblem, traj: Trajectory) -> dict[str, float]:
    """Worst residual per hard-constraint family at the solved nodes.

    Families mirror the subproblem rows: thrust magnitude bounds, tilt
    cone, speed bound, endpoint boundary rows, and (two-vehicle cases)
    the payload length.  All values are nonnegative; 0 means clean.
    """
    cone = build_control_cone(problem.control, problem.model)
    out = {"thrust": 0.0, "tilt": 0.0, "speed": 0.0, "boundary": 0.0}
    for v in range(problem.n_vehicles):
        pos = traj.x[:, problem.pos_indices(v)]
        vel = traj.x[:, problem.vel_indices(v)]
        u = traj.u[:, problem.control_indices(v)]
        norms = np.linalg.norm(u, axis=1)
        high = float(np.max(norms - cone.gamma_max))
        low = -math.inf
        if cone.gamma_min is not None:
            low = float(np.max(cone.gamma_min - norms))
        out["thrust"] = max(out["thrust"], high, low)
        if cone.tilt_cos is not None:
            out["tilt"] = max(
                out["tilt"], float(np.max(cone.tilt_cos * norms - u[:, 0]))
            )
        out["speed"] = max(
            out["speed"],
            float(np.max(np.linalg.norm(vel, axis=1) - problem.bcs.v_max)),
        )
        out["boundary"] = max(
            out["boundary"],
            float(np.max(np.abs(pos[0] - problem.bcs.r_i[v]))),
            float(np.max(np.abs(pos[-1] - problem.bcs.r_f[v]))),
            float(np.max(np.abs(vel[0]))),
            float(np.max(np.abs(vel[-1]))),
        )
    if problem.payload is not None:
        p1 = traj.x[:, problem.pos_indices(0)]
        p2 = traj.x[:, problem.pos_indices(1)]
        lengths = np.linalg.norm(p1 - p2, axis=1)
        out["payload"] = float(np.max(np.abs(lengths - problem.payload.l_o)))
    return {key: max(0.0, val) for key, val in out.items()}


def containment_violation(
    problem: NonconvexProblem, traj: Trajectory
) -> float:
    """Worst depth by which an obstacle center sits inside a keep-out
    region at a node time.

    The keep-out region of an all-triggers compound is the box where every
    trigger is active and every constraint is positive, so the penetration
    depth is the smallest of all face margins: trigger margins -g (the
    axial faces of the beam rectangle) and constraint values c (the
    lateral faces).  A center resting on any face has depth ~0 even if it
    is deep with respect to the other faces; that is the correct reading,
    since the compound product vanishes with any single trigger factor.
    Returns 0 when every node is clean.
    """
    dt = traj.dt
    return max(
        (
            violation_depth(stc, traj.x[k])
            for k in range(problem.K)
            for stc in problem.stcs_at(k * dt)
        ),
        default=0.0,
    )


@dataclass(frozen=True)
class CampaignSpec:
    """What to run: scenario, grid sizes, batch size per grid, seed.

    cases_per_K counts converged cases; failed attempts are kept in the
    books and replaced by fresh draws, up to resample_factor times the
    quota in total attempts.
    """

    scenario: int
    K_list: tuple[int, ...] = (15, 20, 25, 30)
    cases_per_K: int = 100
    seed: int = 0
    dense_samples: int = DENSE_SAMPLES
    resample_factor: int = 4

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")
        K_list = tuple(int(k) for k in self.K_list)
        object.__setattr__(self, "K_list", K_list)
        if not K_list or any(k < 2 for k in K_list):
            raise ValueError("every node count must be at least 2")
        if self.cases_per_K < 1:
            raise ValueError("cases_per_K must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.dense_samples < 2:
            raise ValueError("dense_samples must be at least 2")
        if self.resample_factor < 1:
            raise ValueError("resample_factor must be at least 1")


@dataclass(frozen=True)
class CaseResult:
    """One campaign case, identified by (K, attempt).

    total_solve_time sums the subproblem solver times in seconds across
    every final-time attempt; final_solve_time is the converging attempt
    alone and is what the runtime tables report, since each retry is a
    fresh run of the algorithm at a longer final time.  clipping is in
    meters and nan for failed cases; violations holds the node_violations
    families (plus containment for two-vehicle cases) and is empty for
    failed cases.
    """

    scenario: int
    K: int
    attempt: int
    converged: bool
    iterations: int
    retries: int
    total_solve_time: float
    final_solve_time: float
    clipping: float
    violations: dict[str, float]
    trajectory: Trajectory | None = None

    def __post_init__(self):
        if self.iterations < 0 or self.retries < 0:
            raise ValueError("iteration and retry counts must be nonnegative")
        if self.converged and not self.clipping >= 0.0:
            raise ValueError("a converged case needs a nonnegative clipping")


def build_case(scenario: int, K: int, rng: np.random.Generator) -> NonconvexProblem:
    """Sample one case and bind it into a solvable problem."""
    control = ControlSetParams()
    if scenario == 1:
        hoop, bcs = sample_scenario1(rng, K)
        return assemble_problem(1, hoop, bcs, QuadModel(), control, K)
    beam, bcs = sample_scenario2(rng)
    model = QuadModel(spatial_dim=2)
    return assemble_problem(2, beam, bcs, model, control, K)


def case_rng(spec: CampaignSpec, K: int, attempt: int) -> np.random.Generator:
    """The case's private stream; a pure function of its identity."""
    return np.random.default_rng(
        np.random.SeedSequence((spec.seed, spec.scenario, K, attempt))
    )


def run_case(spec: CampaignSpec, K: int, attempt: int) -> CaseResult:
    """Sample, solve, validate, and measure one campaign case."""
    failed = dict(
        scenario=spec.scenario, K=K, attempt=attempt, converged=False,
        clipping=math.nan, violations={}, trajectory=None,
    )
    try:
        problem = build_case(spec.scenario, K, case_rng(spec, K, attempt))
    except SamplingBudgetExceeded:
        return CaseResult(iterations=0, retries=0, total_solve_time=0.0,
                          final_solve_time=0.0, **failed)
    traj, report = solve_scvx(problem)
    if not report.converged:
        return CaseResult(
            iterations=report.iteration_count, retries=report.retries,
            total_solve_time=report.total_solve_time,
            final_solve_time=report.final_attempt_solve_time, **failed,
        )
    violations = node_violations(problem, traj)
    if spec.scenario == 1:
        clip = clipping_scenario1(
            traj, problem.hoop, spec.dense_samples, problem.model
        )
    else:
        clip = clipping_scenario2(
            traj, problem.beam, spec.dense_samples, problem.model
        )
        violations["containment"] = containment_violation(problem, traj)
    return CaseResult(
        scenario=spec.scenario, K=K, attempt=attempt, converged=True,
        iterations=report.iteration_count, retries=report.retries,
        total_solve_time=report.total_solve_time,
        final_solve_time=report.final_attempt_solve_time, clipping=clip,
        violations=violations, trajectory=traj,
    )


def _deciding_prefix(
    ordered: list[CaseResult], quota: int
) -> tuple[list[CaseResult], int]:
    """Shortest attempt-order prefix holding `quota` converged cases."""
    out: list[CaseResult] = []
    converged = 0
    for res in ordered:
        out.append(res)
        converged += res.converged
        if converged == quota:
            break
    return out, converged


def _run_batch(spec: CampaignSpec, K: int, workers: int) -> tuple[CaseResult, ...]:
    quota = spec.cases_per_K
    cap = spec.resample_factor * quota
    ordered: list[CaseResult] = []
    start = 0
    wave = 1 if workers <= 1 else max(2 * workers, quota)
    while start < cap:
        stop = min(start + wave, cap)
        attempts = range(start, stop)
        if workers <= 1:
            batch = [run_case(spec, K, a) for a in attempts]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_case, spec, K, a) for a in attempts]
                batch = [f.result() for f in futures]
        ordered.extend(batch)
        prefix, got = _deciding_prefix(ordered, quota)
        if got == quota:
            return tuple(prefix)
        start = stop
    # quota unmet within the attempt cap: everything tried is the batch
    return tuple(ordered)


def five_number(values) -> tuple[float, float, float, float, float]:
    """Mean, median, population std, min, max; nans when empty."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return (math.nan,) * 5
    return (
        float(v.mean()),
        float(np.median(v)),
        float(v.std()),
        float(v.min()),
        float(v.max()),
    )


def format_stats_table(title: str, rows) -> str:
    """Five-column statistics table; rows are (K, (mean, median, std, min, max))."""
    header = f"{'K':>4s} {'Mean':>10s} {'Median':>10s} {'Std. Dev.':>10s} {'Min':>10s} {'Max':>10s}"
    lines = [title, header]
    for K, stats in rows:
        cells = " ".join(f"{s:>10.3f}" for s in stats)
        lines.append(f"{K:>4d} {cells}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class KBatch:
    """All attempts for one node count, in attempt order."""

    K: int
    results: tuple[CaseResult, ...]

    @property
    def converged(self) -> tuple[CaseResult, ...]:
        return tuple(r for r in self.results if r.converged)

    @property
    def n_converged(self) -> int:
        return len(self.converged)

    @property
    def n_failed(self) -> int:
        return len(self.results) - self.n_converged

    def runtime_stats(self):
        return five_number([1e3 * r.final_solve_time for r in self.converged])

    def clipping_stats(self):
        return five_number([1e2 * r.clipping for r in self.converged])


@dataclass(frozen=True)
class CampaignResult:
    """Per-K batches plus the table/manifest formatting.

    Tables and the manifest are pure functions of the stored per-case
    results, so re-aggregating the same results reproduces them bit for
    bit.  The manifest and clipping table are deterministic given the
    campaign seed; the runtime table reports wall-clock solver time and
    varies between runs.
    """

    spec: CampaignSpec
    batches: tuple[KBatch, ...]

    @property
    def n_converged(self) -> int:
        return sum(b.n_converged for b in self.batches)

    @property
    def n_failed(self) -> int:
        return sum(b.n_failed for b in self.batches)

    def runtime_table(self) -> str:
        rows = [(b.K, b.runtime_stats()) for b in self.batches]
        title = f"solver runtime for scenario {self.spec.scenario} [ms]"
        return format_stats_table(title, rows)

    def clipping_table(self) -> str:
        rows = [(b.K, b.clipping_stats()) for b in self.batches]
        title = f"constraint clipping for scenario {self.spec.scenario} [cm]"
        return format_stats_table(title, rows)

    def manifest(self) -> str:
        """Case-by-case record; wall-clock times deliberately excluded."""
        lines = [
            "campaign-manifest v1",
            f"scenario {self.spec.scenario}",
            f"seed {self.spec.seed}",
            f"cases_per_K {self.spec.cases_per_K}",
        ]
        for b in self.batches:
            lines.append(
                f"K {b.K} attempts {len(b.results)} "
                f"converged {b.n_converged} failed {b.n_failed}"
            )
        for b in self.batches:
            for r in b.results:
                lines.append(
                    f"case K {r.K} attempt {r.attempt} "
                    f"converged {'true' if r.converged else 'false'} "
                    f"iterations {r.iterations} retries {r.retries} "
                    f"clipping {r.clipping!r}"
                )
        lines.append(f"total converged {self.n_converged} failed {self.n_failed}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return (
            self.runtime_table() + "\n" + self.clipping_table() + "\n"
            + f"converged {self.n_converged} failed {self.n_failed}\n"
        )


def run_campaign(spec: CampaignSpec, workers: int = 1) -> CampaignResult:
    """Solve cases_per_K sampled cases per node count, resampling failures.

    Failed attempts stay in the books and fresh cases are drawn in
    their place until the quota of converged cases is met (or the
    attempt cap is hit; a short batch is data, not an error).  Case
    results are keyed by attempt index, so completion order and worker
    count cannot change the outcome.
    """
    batches = tuple(
        KBatch(K=K, results=_run_batch(spec, K, workers)) for K in spec.K_list
    )
    return CampaignResult(spec=spec, batches=batches)
