"""Point-mass quad-rotor model, exact FOH discretization, and control sets.

The continuous model is linear time-invariant:

    x = (r, v),   dx/dt = A x + B u + E w

with A = [[0, I], [0, -k_d I]], B = (1/m) [[0], [I]], and a constant gravity
disturbance E w acting on the vertical velocity component.  The vertical axis
is the first spatial coordinate (up-east-north ordering).  In the planar
variant (spatial_dim = 2) the vertical axis is eliminated: a constant thrust
component cancels gravity, so E w = 0 and the control is the horizontal
thrust vector.

Discretization assumes a first-order hold on the control (linear
interpolation between node values) and is exact for this LTI model.  Two
independent routes are provided: :func:`discretize_foh` evaluates one
augmented matrix exponential, while :func:`propagate_dense` evaluates the
closed-form convolution integrals axis by axis.  They serve as oracles for
each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

__all__ = [
    "ControlConeSpec",
    "ControlSetParams",
    "DiscreteDynamics",
    "QuadModel",
    "build_control_cone",
    "discretize_foh",
    "propagate_dense",
]


@dataclass(frozen=True)
class QuadModel:
    """Simplified quad-rotor: mass, linear drag, gravity, spatial dimension."""

    m: float = 0.35
    k_d: float = 0.0
    g: float = 9.81
    spatial_dim: int = 3

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.k_d < 0:
            raise ValueError("drag coefficient must be nonnegative")
        if self.g <= 0:
            raise ValueError("gravitational acceleration must be positive")
        if self.spatial_dim not in (2, 3):
            raise ValueError("spatial_dim must be 2 or 3")

    @property
    def n_x(self) -> int:
        return 2 * self.spatial_dim

    @property
    def n_u(self) -> int:
        return self.spatial_dim

    def a_matrix(self) -> np.ndarray:
        d = self.spatial_dim
        A = np.zeros((2 * d, 2 * d))
        A[:d, d:] = np.eye(d)
        A[d:, d:] = -self.k_d * np.eye(d)
        return A

    def b_matrix(self) -> np.ndarray:
        d = self.spatial_dim
        B = np.zeros((2 * d, d))
        B[d:, :] = np.eye(d) / self.m
        return B

    def gravity_vector(self) -> np.ndarray:
        """E w: constant acceleration on the state derivative."""
        d = self.spatial_dim
        ew = np.zeros(2 * d)
        if d == 3:
            ew[d] = -self.g  # vertical velocity component
        return ew

    def hover_control(self) -> np.ndarray:
        """Thrust that exactly cancels gravity (zero in the planar model)."""
        u = np.zeros(self.spatial_dim)
        if self.spatial_dim == 3:
            u[0] = self.m * self.g
        return u


@dataclass(frozen=True)
class ControlSetParams:
    """Thrust-magnitude, tilt, and altitude-hold limits on the control."""

    T_min: float = 2.0
    T_max: float = 5.0
    theta_max: float = math.radians(45.0)
    altitude_hold: bool = False

    def __post_init__(self):
        if not 0 < self.T_min <= self.T_max:
            raise ValueError("need 0 < T_min <= T_max")
        if not 0 < self.theta_max < math.pi:
            raise ValueError("theta_max must lie in (0, pi)")

    def validate_against(self, model: QuadModel):
        if self.altitude_hold or model.spatial_dim == 2:
            mg = model.m * model.g
            if not (self.T_min <= mg < self.T_max):
                raise ValueError(
                    "altitude hold requires T_min <= m*g < T_max; "
                    f"got m*g = {mg:.4f}"
                )


@dataclass(frozen=True)
class DiscreteDynamics:
    """Exact FOH one-step map x+ = A_d x + B_minus u_k + B_plus u_{k+1} + ew_d."""

    A_d: np.ndarray
    B_minus: np.ndarray
    B_plus: np.ndarray
    ew_d: np.ndarray
    dt: float
    K: int

    def __post_init__(self):
        n_x = self.A_d.shape[0]
        if self.A_d.shape != (n_x, n_x):
            raise ValueError("A_d must be square")
        if self.B_minus.shape != self.B_plus.shape or self.B_minus.shape[0] != n_x:
            raise ValueError("control influence matrices must be n_x by n_u")
        if self.ew_d.shape != (n_x,):
            raise ValueError("disturbance vector length must equal n_x")
        if self.dt <= 0 or self.K < 2:
            raise ValueError("need dt > 0 and K >= 2")

    @property
    def t_f(self) -> float:
        return self.dt * (self.K - 1)

    def node_times(self) -> np.ndarray:
        return self.dt * np.arange(self.K)

    def step(self, x, u_k, u_kp1) -> np.ndarray:
        return self.A_d @ x + self.B_minus @ u_k + self.B_plus @ u_kp1 + self.ew_d


def discretize_foh(model: QuadModel, t_f: float, K: int) -> DiscreteDynamics:
    """Discretize the LTI model over K nodes with a first-order hold.

    One augmented matrix exponential produces A_d, both control influence
    matrices, and the discrete gravity term simultaneously: the control is
    appended to the state with a constant rate variable, so the FOH
    convolution integrals appear as off-diagonal blocks of exp(M dt).
    """
    if t_f <= 0:
        raise ValueError("t_f must be positive")
    if K < 2:
        raise ValueError("K must be at least 2")
    dt = t_f / (K - 1)
    n_x, n_u = model.n_x, model.n_u
    n = n_x + 2 * n_u + 1
    M = np.zeros((n, n))
    M[:n_x, :n_x] = model.a_matrix()
    M[:n_x, n_x:n_x + n_u] = model.b_matrix()
    M[:n_x, -1] = model.gravity_vector()
    M[n_x:n_x + n_u, n_x + n_u:n_x + 2 * n_u] = np.eye(n_u)
    Phi = expm(M * dt)
    A_d = Phi[:n_x, :n_x]
    Phi_u = Phi[:n_x, n_x:n_x + n_u]
    Phi_du = Phi[:n_x, n_x + n_u:n_x + 2 * n_u]
    ew_d = Phi[:n_x, -1]
    return DiscreteDynamics(
        A_d=A_d,
        B_minus=Phi_u - Phi_du / dt,
        B_plus=Phi_du / dt,
        ew_d=ew_d,
        dt=dt,
        K=K,
    )


def _foh_integrals(k_d: float, s: np.ndarray):
    """Closed-form convolution integrals of the drag kernel e^{-k(s-tau)}.

    Returns (exp(-k s), I0, I1, J0, J1) with
        I0 = integral of the kernel            -> s          as k -> 0
        I1 = integral of the kernel times tau  -> s^2/2
        J0 = integral of I0                    -> s^2/2
        J1 = integral of I1                    -> s^3/6
    Uses expm1 closed forms, switching to a short series below k*s = 1e-2
    where the nested subtractions would otherwise lose digits.
    """
    s = np.asarray(s, dtype=float)
    if k_d == 0.0:
        ek = np.ones_like(s)
        return ek, s, s**2 / 2, s**2 / 2, s**3 / 6
    x = k_d * s
    ek = np.exp(-x)
    I0 = -np.expm1(-x) / k_d
    J0 = (s - I0) / k_d
    J1 = (s**2 / 2 - J0) / k_d
    # series fallback where the closed forms lose digits to cancellation
    small = x < 1e-2
    if np.any(small):
        xs = x[small]
        p0 = 1 - xs / 2 + xs**2 / 6 - xs**3 / 24 + xs**4 / 120 - xs**5 / 720
        p1 = 1 / 2 - xs / 6 + xs**2 / 24 - xs**3 / 120 + xs**4 / 720
        p2 = 1 / 6 - xs / 24 + xs**2 / 120 - xs**3 / 720 + xs**4 / 5040
        I0[small] = s[small] * p0
        J0[small] = s[small] ** 2 * p1
        J1[small] = s[small] ** 3 * p2
    I1 = J0  # both equal (s - I0)/k for this kernel
    return ek, I0, I1, J0, J1


def propagate_dense(
    model: QuadModel,
    x0: np.ndarray,
    u_k: np.ndarray,
    u_kp1: np.ndarray,
    dt: float,
    samples: int,
) -> np.ndarray:
    """Exact continuous trajectory under FOH control on one interval.

    Returns an array of shape (samples, n_x) sampled uniformly on [0, dt],
    including both endpoints.  Axes decouple for this model, so position and
    velocity follow scalar closed forms per axis.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    d = model.spatial_dim
    x0 = np.asarray(x0, dtype=float)
    u_k = np.asarray(u_k, dtype=float)
    u_kp1 = np.asarray(u_kp1, dtype=float)
    if x0.shape != (2 * d,) or u_k.shape != (d,) or u_kp1.shape != (d,):
        raise ValueError("state/control dimensions do not match the model")
    s = np.linspace(0.0, dt, samples)
    ek, I0, I1, J0, J1 = _foh_integrals(model.k_d, s)
    grav = np.zeros(d)
    if d == 3:
        grav[0] = -model.g
    # acceleration a(tau) = c0 + c1 tau per axis
    c0 = u_k / model.m + grav
    c1 = (u_kp1 - u_k) / (model.m * dt)
    r0, v0 = x0[:d], x0[d:]
    pos = r0[None, :] + np.outer(I0, v0) + np.outer(J0, c0) + np.outer(J1, c1)
    vel = np.outer(ek, v0) + np.outer(I0, c0) + np.outer(I1, c1)
    return np.hstack([pos, vel])


@dataclass(frozen=True)
class ControlConeSpec:
    """Conic description of the admissible (u, Gamma) set at one node.

    Always includes the lossless-relaxation cone ||u|| <= Gamma.  The
    remaining entries are optional linear constraints:

      gamma_min / gamma_max : bounds on Gamma (None disables)
      tilt_cos              : cos(theta_max) Gamma <= u_vertical (3-D only)
      hold_value            : equality u_vertical = m g (3-D altitude hold)

    In the planar model the vertical axis is already eliminated, so the set
    reduces to a disk: Gamma <= gamma_max with gamma_max the derived radius.
    """

    dim: int
    gamma_min: float | None
    gamma_max: float
    tilt_cos: float | None
    hold_value: float | None

    def contains(self, u: np.ndarray, tol: float = 1e-9) -> bool:
        """Membership test for a thrust vector (with Gamma = ||u||)."""
        u = np.asarray(u, dtype=float)
        gamma = float(np.linalg.norm(u))
        if self.gamma_min is not None and gamma < self.gamma_min - tol:
            return False
        if gamma > self.gamma_max + tol:
            return False
        if self.tilt_cos is not None and self.tilt_cos * gamma > u[0] + tol:
            return False
        if self.hold_value is not None and abs(u[0] - self.hold_value) > tol:
            return False
        return True


def build_control_cone(params: ControlSetParams, model: QuadModel) -> ControlConeSpec:
    """Derive the convex (u, Gamma) description of the control set.

    For the 3-D set the thrust annulus is relaxed to ||u|| <= Gamma with
    T_min <= Gamma <= T_max and the tilt cone written against Gamma; the
    relaxation is tight at optima (checked downstream, not enforced here).
    For the planar model the vertical component is pinned at m g and
    eliminated, leaving a disk whose radius combines the thrust and tilt
    limits.
    """
    params.validate_against(model)
    mg = model.m * model.g
    if model.spatial_dim == 3:
        return ControlConeSpec(
            dim=3,
            gamma_min=params.T_min,
            gamma_max=params.T_max,
            tilt_cos=math.cos(params.theta_max),
            hold_value=mg if params.altitude_hold else None,
        )
    # planar reduction: ||u_xy||^2 <= T_max^2 - (mg)^2 and, when the tilt
    # cone binds (theta_max < 90 deg), ||u_xy|| <= mg tan(theta_max);
    # T_min <= m g was checked above so the lower bound is vacuous here
    radius = math.sqrt(params.T_max**2 - mg**2)
    if params.theta_max < math.pi / 2:
        radius = min(radius, mg * math.tan(params.theta_max))
    return ControlConeSpec(
        dim=2,
        gamma_min=None,
        gamma_max=radius,
        tilt_cos=None,
        hold_value=None,
    )
