"""Constraint builders and problem assembly for the two flight scenarios.

Scenario 1 threads a single quad-rotor through a hoop.  The hoop is guarded
by a compound state-triggered constraint: whenever the vehicle is inside a
trigger corridor (a slab of half-length l_c around the hoop plane, optionally
capped at lateral radius rho_g), its lateral distance from the hoop axis must
not exceed the constraint-corridor radius rho_c.

Scenario 2 moves two planar quad-rotors joined by a rigid beam payload of
length l_o through a field of cylindrical obstacles.  Each obstacle center is
excluded from a moving keep-out rectangle spanned by the vehicle pair: if the
obstacle sits axially between the vehicles (within margin w_o past each end),
it must lie laterally at least w_o away on one side or the other.  The
payload itself is the nonconvex equality ||r1 - r2|| = l_o.

All constraint functions operate on a node vector z holding stacked vehicle
states; index tuples say where the positions live, so the same builders serve
bare geometry vectors and full subproblem states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ControlSetParams,
    DiscreteDynamics,
    QuadModel,
    discretize_foh,
)
from .stc import CompoundStc, ConstraintForm, SmoothFn, TriggerMode

__all__ = [
    "BeamSpec",
    "BoundaryConditions",
    "HoopSpec",
    "NonconvexProblem",
    "PayloadLink",
    "assemble_problem",
    "build_beam_stc",
    "build_hoop_stc",
    "build_hoop_velocity_stc",
    "build_l_payload_stcs",
    "build_payload_link",
    "build_segment_keepout",
]


@dataclass(frozen=True)
class HoopSpec:
    """Hoop geometry: center path, plane normal, corridor radii and length.

    center is either a single position (static hoop) or a (n, 3) waypoint
    table paired with times, interpolated linearly at evaluation.  rho_g may
    be infinite; together with require_passage that drops the lateral
    trigger, making the slab around the hoop plane the whole trigger region.
    rho_h is the physical hoop radius; it does not enter the constraint
    functions and is kept only to sanity-check the corridor ordering
    rho_c <= rho_h <= rho_g.
    """

    center: np.ndarray
    normal: np.ndarray
    l_c: float
    rho_c: float
    rho_g: float = math.inf
    rho_h: float | None = None
    require_passage: bool = False
    times: np.ndarray | None = None

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        normal = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "normal", normal)
        if normal.shape != (3,) or abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValueError("normal must be a unit 3-vector")
        if self.l_c <= 0:
            raise ValueError("corridor half-length must be positive")
        if self.rho_c < 0:
            raise ValueError("constraint-corridor radius must be nonnegative")
        if self.rho_g < self.rho_c:
            raise ValueError("need rho_c <= rho_g")
        if self.rho_h is not None and not (self.rho_c <= self.rho_h <= self.rho_g):
            raise ValueError("need rho_c <= rho_h <= rho_g")
        if center.ndim == 1:
            if center.shape != (3,):
                raise ValueError("static center must be a 3-vector")
            if self.times is not None:
                raise ValueError("times given without a waypoint table")
        else:
            if self.times is None:
                raise ValueError("waypoint table needs matching times")
            times = np.asarray(self.times, dtype=float)
            if center.shape[1] != 3 or times.shape != (center.shape[0],):
                raise ValueError("waypoint table needs matching times")
            if np.any(np.diff(times) <= 0):
                raise ValueError("waypoint times must increase")
            object.__setattr__(self, "times", times)

    def center_at(self, t: float) -> np.ndarray:
        if self.center.ndim == 1:
            return self.center
        return np.array([
            np.interp(t, self.times, self.center[:, axis]) for axis in range(3)
        ])

    @property
    def lateral_trigger_active(self) -> bool:
        return not self.require_passage and math.isfinite(self.rho_g)


@dataclass(frozen=True)
class BeamSpec:
    """Payload length, keep-out half-width, and the obstacle field."""

    l_o: float
    w_o: float
    obstacles: np.ndarray
    R_o: float

    def __post_init__(self):
        obstacles = np.atleast_2d(np.asarray(self.obstacles, dtype=float))
        object.__setattr__(self, "obstacles", obstacles)
        if self.l_o <= 0:
            raise ValueError("payload length must be positive")
        if self.R_o <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.w_o < self.R_o:
            raise ValueError("keep-out half-width must cover the obstacle radius")
        if obstacles.ndim != 2 or obstacles.shape[1] != 2:
            raise ValueError("obstacles must be planar positions")

    @property
    def N_o(self) -> int:
        return self.obstacles.shape[0]


@dataclass(frozen=True)
class BoundaryConditions:
    """Endpoint data: rest-to-rest between r_i and r_f in time t_f.

    Velocities vanish at both ends and the controls equal the hover thrust
    m g e_up (zero in the planar reduction); those conventions are fixed, not
    fields.  Positions are (n_vehicles, dim) arrays; a flat vector means one
    vehicle.
    """

    r_i: np.ndarray
    r_f: np.ndarray
    t_f: float
    v_max: float

    def __post_init__(self):
        r_i = np.atleast_2d(np.asarray(self.r_i, dtype=float))
        r_f = np.atleast_2d(np.asarray(self.r_f, dtype=float))
        object.__setattr__(self, "r_i", r_i)
        object.__setattr__(self, "r_f", r_f)
        if r_i.shape != r_f.shape:
            raise ValueError("initial and final positions must have equal shape")
        if self.t_f <= 0:
            raise ValueError("t_f must be positive")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")

    @property
    def n_vehicles(self) -> int:
        return self.r_i.shape[0]

    @property
    def dim(self) -> int:
        return self.r_i.shape[1]


def _embed(pos, value_r, grad_r) -> SmoothFn:
    """Lift a function of a position block into a function of the node z."""
    pos = np.asarray(pos, dtype=int)

    def value(z):
        return float(value_r(np.asarray(z, dtype=float)[pos]))

    def grad(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[0])
        out[pos] = grad_r(z[pos])
        return out

    return SmoothFn(value=value, grad=grad)


def _hoop_triggers(spec: HoopSpec, r_h, pos_idx):
    n = spec.normal
    Nh = np.eye(3) - np.outer(n, n)  # N^T N = N (orthogonal projector)
    triggers = [
        _embed(pos_idx, lambda r: n @ (r_h - r) - spec.l_c, lambda r: -n),
        _embed(pos_idx, lambda r: n @ (r - r_h) - spec.l_c, lambda r: n.copy()),
    ]
    if spec.lateral_trigger_active:
        triggers.append(_embed(
            pos_idx,
            lambda r: (r - r_h) @ Nh @ (r - r_h) - spec.rho_g**2,
            lambda r: 2 * Nh @ (r - r_h),
        ))
    return tuple(triggers), Nh


def build_hoop_stc(spec: HoopSpec, t_k: float, pos_idx=(0, 1, 2)) -> CompoundStc:
    """Corridor constraint at node time t_k: triggered by the axial slab (and
    the lateral radius rho_g unless dropped), the squared lateral distance
    must stay within rho_c^2."""
    r_h = spec.center_at(t_k)
    triggers, Nh = _hoop_triggers(spec, r_h, pos_idx)
    constraint = _embed(
        pos_idx,
        lambda r: (r - r_h) @ Nh @ (r - r_h) - spec.rho_c**2,
        lambda r: 2 * Nh @ (r - r_h),
    )
    return CompoundStc(
        triggers=triggers,
        constraints=(constraint,),
        trigger_mode=TriggerMode.AND,
        constraint_form=ConstraintForm.INEQUALITY_NO_SLACK,
    )


def build_hoop_velocity_stc(
    spec: HoopSpec,
    t_k: float,
    v_des: np.ndarray,
    v_tol: float,
    pos_idx=(0, 1, 2),
    vel_idx=(3, 4, 5),
) -> CompoundStc:
    """Optional extension: inside the trigger corridor, the velocity must
    stay within v_tol of a prescribed crossing velocity."""
    v_des = np.asarray(v_des, dtype=float)
    r_h = spec.center_at(t_k)
    triggers, _ = _hoop_triggers(spec, r_h, pos_idx)
    constraint = _embed(
        vel_idx,
        lambda v: (v - v_des) @ (v - v_des) - v_tol**2,
        lambda v: 2 * (v - v_des),
    )
    return CompoundStc(
        triggers=triggers,
        constraints=(constraint,),
        trigger_mode=TriggerMode.AND,
        constraint_form=ConstraintForm.INEQUALITY_NO_SLACK,
    )


# clockwise quarter-turn: q = ROT90 @ p; satisfies ROT90^T = -ROT90, which the
# chain-rule formulas below rely on
_ROT90 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _pair_frame(r1, r2):
    delta = r2 - r1
    length = float(np.linalg.norm(delta))
    if length <= 0.0:
        raise ValueError("coincident vehicle positions: keep-out frame undefined")
    p = delta / length
    q = _ROT90 @ p
    return p, q, length


def _embed_pair(idx1, idx2, value_fn, grad_fn) -> SmoothFn:
    """Lift a function of (r1, r2) with per-vehicle gradients into z."""
    idx1 = np.asarray(idx1, dtype=int)
    idx2 = np.asarray(idx2, dtype=int)

    def value(z):
        z = np.asarray(z, dtype=float)
        return float(value_fn(z[idx1], z[idx2]))

    def grad(z):
        z = np.asarray(z, dtype=float)
        g1, g2 = grad_fn(z[idx1], z[idx2])
        out = np.zeros(z.shape[0])
        out[idx1] = g1
        out[idx2] = g2
        return out

    return SmoothFn(value=value, grad=grad)


def build_segment_keepout(
    obstacle: np.ndarray,
    w_o: float,
    idx1=(0, 1),
    idx2=(2, 3),
    frozen_frame: bool = False,
) -> CompoundStc:
    """Keep-out rectangle around the segment from r1 to r2.

    Triggered when the obstacle center lies axially between the endpoints
    (within margin w_o past each); then it must clear the segment laterally
    by w_o on one side or the other.  Gradients differentiate through the
    segment frame (p, q) unless frozen_frame, which treats the frame as a
    constant of the linearization point.
    """
    r_o = np.asarray(obstacle, dtype=float)

    def g4_val(r1, r2):
        p, _, _ = _pair_frame(r1, r2)
        return p @ (r1 - r_o) - w_o

    def g4_grad(r1, r2):
        p, _, L = _pair_frame(r1, r2)
        if frozen_frame:
            return p.copy(), np.zeros(2)
        P = np.eye(2) - np.outer(p, p)
        t = P @ (r1 - r_o) / L
        return p - t, t

    def g5_val(r1, r2):
        p, _, _ = _pair_frame(r1, r2)
        return p @ (r_o - r2) - w_o

    def g5_grad(r1, r2):
        p, _, L = _pair_frame(r1, r2)
        if frozen_frame:
            return np.zeros(2), -p
        P = np.eye(2) - np.outer(p, p)
        t = P @ (r_o - r2) / L
        return -t, -p + t

    def c2_val(r1, r2):
        _, q, _ = _pair_frame(r1, r2)
        return q @ (r_o - r2) + w_o

    def c2_grad(r1, r2):
        p, q, L = _pair_frame(r1, r2)
        if frozen_frame:
            return np.zeros(2), -q
        P = np.eye(2) - np.outer(p, p)
        t = P @ _ROT90 @ (r_o - r2) / L
        return t, -q - t

    def c3_val(r1, r2):
        _, q, _ = _pair_frame(r1, r2)
        return q @ (r1 - r_o) + w_o

    def c3_grad(r1, r2):
        p, q, L = _pair_frame(r1, r2)
        if frozen_frame:
            return q.copy(), np.zeros(2)
        P = np.eye(2) - np.outer(p, p)
        t = P @ _ROT90 @ (r1 - r_o) / L
        return q + t, -t

    return CompoundStc(
        triggers=(
            _embed_pair(idx1, idx2, g4_val, g4_grad),
            _embed_pair(idx1, idx2, g5_val, g5_grad),
        ),
        constraints=(
            _embed_pair(idx1, idx2, c2_val, c2_grad),
            _embed_pair(idx1, idx2, c3_val, c3_grad),
        ),
        trigger_mode=TriggerMode.AND,
        constraint_form=ConstraintForm.EQUALITY_WITH_SLACKS,
    )


def build_beam_stc(
    spec: BeamSpec,
    obstacle_index: int,
    idx1=(0, 1),
    idx2=(2, 3),
    frozen_frame: bool = False,
) -> CompoundStc:
    return build_segment_keepout(
        spec.obstacles[obstacle_index], spec.w_o, idx1, idx2, frozen_frame
    )


def build_l_payload_stcs(
    obstacle: np.ndarray,
    w_o: float,
    idx1=(0, 1),
    idx2=(2, 3),
    idx3=(4, 5),
    frozen_frame: bool = False,
) -> tuple[CompoundStc, CompoundStc]:
    """Optional extension: three vehicles carrying an L-shaped payload get
    one keep-out rectangle per leg of the L."""
    return (
        build_segment_keepout(obstacle, w_o, idx1, idx2, frozen_frame),
        build_segment_keepout(obstacle, w_o, idx2, idx3, frozen_frame),
    )


@dataclass(frozen=True)
class PayloadLink:
    """Rigid link ||r1 - r2|| = l_o with its linearization about a reference.

    The first-order expansion about (r1*, r2*) is
        ||d*|| + n^T (d - d*) = l_o,  d = r1 - r2,  n = d*/||d*||,
    and n^T d* = ||d*||, so the linearized row is simply n^T (r1 - r2) = l_o.
    """

    l_o: float

    def __post_init__(self):
        if self.l_o <= 0:
            raise ValueError("payload length must be positive")

    def linearize(self, r1_star, r2_star):
        """Returns (n, rhs) for the row n . r1 - n . r2 = rhs."""
        delta = np.asarray(r1_star, dtype=float) - np.asarray(r2_star, dtype=float)
        length = float(np.linalg.norm(delta))
        if length <= 0.0:
            raise ValueError("coincident reference positions: link direction undefined")
        return delta / length, self.l_o

    def residual(self, r1, r2) -> float:
        return float(np.linalg.norm(np.asarray(r1) - np.asarray(r2)) - self.l_o)


def build_payload_link(l_o: float) -> PayloadLink:
    return PayloadLink(l_o=l_o)


@dataclass(frozen=True)
class NonconvexProblem:
    """Assembled scenario: model, control set, boundary data, constraint
    builders, node count.  Immutable; the solver consumes it read-only."""

    scenario: int
    model: QuadModel
    control: ControlSetParams
    bcs: BoundaryConditions
    K: int
    hoop: HoopSpec | None = None
    beam: BeamSpec | None = None
    frozen_frame: bool = False

    @property
    def n_vehicles(self) -> int:
        return self.bcs.n_vehicles

    @property
    def n_x(self) -> int:
        return self.n_vehicles * self.model.n_x

    @property
    def n_u(self) -> int:
        return self.n_vehicles * self.model.n_u

    @property
    def vars_per_node(self) -> int:
        return self.n_x + self.n_u

    @property
    def n_gamma(self) -> int:
        return self.n_vehicles

    @property
    def n_alpha(self) -> int:
        """Slack variables per node across all compound constraints."""
        if self.beam is None:
            return 0
        return 2 * self.beam.N_o

    @property
    def payload(self) -> PayloadLink | None:
        if self.beam is None:
            return None
        return build_payload_link(self.beam.l_o)

    def pos_indices(self, vehicle: int) -> np.ndarray:
        base = vehicle * self.model.n_x
        return np.arange(base, base + self.model.spatial_dim)

    def vel_indices(self, vehicle: int) -> np.ndarray:
        base = vehicle * self.model.n_x + self.model.spatial_dim
        return np.arange(base, base + self.model.spatial_dim)

    def control_indices(self, vehicle: int) -> np.ndarray:
        base = vehicle * self.model.n_u
        return np.arange(base, base + self.model.n_u)

    def hover_control(self) -> np.ndarray:
        return np.tile(self.model.hover_control(), self.n_vehicles)

    def discretize(self, t_f: float | None = None) -> DiscreteDynamics:
        """Stacked FOH discretization (block-diagonal across vehicles)."""
        dyn = discretize_foh(self.model, self.bcs.t_f if t_f is None else t_f, self.K)
        n = self.n_vehicles
        if n == 1:
            return dyn
        eye = np.eye(n)
        return DiscreteDynamics(
            A_d=np.kron(eye, dyn.A_d),
            B_minus=np.kron(eye, dyn.B_minus),
            B_plus=np.kron(eye, dyn.B_plus),
            ew_d=np.tile(dyn.ew_d, n),
            dt=dyn.dt,
            K=dyn.K,
        )

    def stcs_at(self, t_k: float) -> tuple[CompoundStc, ...]:
        """Compound constraints at one node, as functions of the stacked state."""
        if self.scenario == 1:
            if self.hoop is None:
                return ()
            return (build_hoop_stc(self.hoop, t_k, pos_idx=tuple(self.pos_indices(0))),)
        if self.beam is None:
            return ()
        return tuple(
            build_beam_stc(
                self.beam,
                l,
                idx1=tuple(self.pos_indices(0)),
                idx2=tuple(self.pos_indices(1)),
                frozen_frame=self.frozen_frame,
            )
            for l in range(self.beam.N_o)
        )


def assemble_problem(
    scenario: int,
    spec,
    bcs: BoundaryConditions,
    model: QuadModel,
    control_params: ControlSetParams,
    K: int,
) -> NonconvexProblem:
    """Validate the pieces and bind them into a solvable problem."""
    if K < 2:
        raise ValueError("K must be at least 2")
    control_params.validate_against(model)
    if scenario == 1:
        if not isinstance(spec, HoopSpec):
            raise TypeError("scenario 1 takes a HoopSpec")
        if model.spatial_dim != 3 or bcs.n_vehicles != 1 or bcs.dim != 3:
            raise ValueError("scenario 1 is a single vehicle in three dimensions")
        return NonconvexProblem(
            scenario=1, model=model, control=control_params, bcs=bcs, K=K, hoop=spec
        )
    if scenario == 2:
        if not isinstance(spec, BeamSpec):
            raise TypeError("scenario 2 takes a BeamSpec")
        if model.spatial_dim != 2 or bcs.n_vehicles != 2 or bcs.dim != 2:
            raise ValueError("scenario 2 is two vehicles in the horizontal plane")
        for name, a, b in (
            ("initial", bcs.r_i[0], bcs.r_i[1]),
            ("final", bcs.r_f[0], bcs.r_f[1]),
        ):
            gap = np.linalg.norm(a - b)
            if abs(gap - spec.l_o) > 1e-9:
                raise ValueError(
                    f"{name} formation violates the payload length: "
                    f"|r1 - r2| = {gap:.6f}, payload is {spec.l_o:.6f}"
                )
        return NonconvexProblem(
            scenario=2, model=model, control=control_params, bcs=bcs, K=K, beam=spec
        )
    raise ValueError("scenario must be 1 or 2")
