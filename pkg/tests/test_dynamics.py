import math

import numpy as np
import pytest
from scipy.integrate import quad

from stctraj.dynamics import (
    ControlSetParams,
    QuadModel,
    build_control_cone,
    discretize_foh,
    propagate_dense,
)


def test_double_integrator_transition():
    model = QuadModel(m=0.35, k_d=0.0)
    dyn = discretize_foh(model, t_f=4.0, K=21)
    dt = dyn.dt
    assert dt == pytest.approx(0.2)
    expect = np.block([
        [np.eye(3), dt * np.eye(3)],
        [np.zeros((3, 3)), np.eye(3)],
    ])
    assert np.allclose(dyn.A_d, expect, atol=1e-14)


def test_foh_influence_closed_form():
    m = 0.35
    model = QuadModel(m=m, k_d=0.0)
    dyn = discretize_foh(model, t_f=3.0, K=11)
    dt = dyn.dt
    for i in range(3):
        assert dyn.B_minus[i, i] == pytest.approx(dt**2 / (3 * m), rel=1e-12)
        assert dyn.B_minus[3 + i, i] == pytest.approx(dt / (2 * m), rel=1e-12)
        assert dyn.B_plus[i, i] == pytest.approx(dt**2 / (6 * m), rel=1e-12)
        assert dyn.B_plus[3 + i, i] == pytest.approx(dt / (2 * m), rel=1e-12)
    # off-axis coupling is zero for this model
    mask = ~np.eye(3, dtype=bool)
    assert np.all(dyn.B_minus[:3][mask] == 0)
    assert np.all(dyn.B_plus[3:][mask] == 0)


def test_gravity_contribution():
    g = 9.81
    model = QuadModel(m=0.35, k_d=0.0, g=g)
    dyn = discretize_foh(model, t_f=2.0, K=5)
    dt = dyn.dt
    expect = np.zeros(6)
    expect[0] = -g * dt**2 / 2
    expect[3] = -g * dt
    assert np.allclose(dyn.ew_d, expect, rtol=1e-12, atol=1e-14)


def _kernel_i0(k, s):
    # integral of e^{-k tau} over [0, s] without shared library code
    return s if k == 0.0 else (1.0 - math.exp(-k * s)) / k


@pytest.mark.parametrize("k_d", [0.0, 0.1, 0.5])
def test_quadrature_oracle(k_d):
    # axis-wise entries of the influence matrices against direct numerical
    # integration of exp(A (dt - tau)) B lambda(tau)
    m, g = 0.35, 9.81
    model = QuadModel(m=m, k_d=k_d, g=g)
    dyn = discretize_foh(model, t_f=1.7, K=6)
    dt = dyn.dt
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=200)

    def entry(weight, row):
        if row == "pos":
            f = lambda tau: _kernel_i0(k_d, dt - tau) / m * weight(tau)
        else:
            f = lambda tau: math.exp(-k_d * (dt - tau)) / m * weight(tau)
        return quad(f, 0.0, dt, **opts)[0]

    lam_minus = lambda tau: 1.0 - tau / dt
    lam_plus = lambda tau: tau / dt
    for axis in (0, 2):
        assert dyn.B_minus[axis, axis] == pytest.approx(entry(lam_minus, "pos"), rel=1e-10)
        assert dyn.B_minus[3 + axis, axis] == pytest.approx(entry(lam_minus, "vel"), rel=1e-10)
        assert dyn.B_plus[axis, axis] == pytest.approx(entry(lam_plus, "pos"), rel=1e-10)
        assert dyn.B_plus[3 + axis, axis] == pytest.approx(entry(lam_plus, "vel"), rel=1e-10)
    ew_pos = quad(lambda tau: -g * _kernel_i0(k_d, dt - tau), 0.0, dt, **opts)[0]
    ew_vel = quad(lambda tau: -g * math.exp(-k_d * (dt - tau)), 0.0, dt, **opts)[0]
    assert dyn.ew_d[0] == pytest.approx(ew_pos, rel=1e-10)
    assert dyn.ew_d[3] == pytest.approx(ew_vel, rel=1e-10)
    # transition blocks per axis: [[1, I0(dt)], [0, e^{-k dt}]]
    for axis in range(3):
        assert dyn.A_d[axis, axis] == pytest.approx(1.0)
        assert dyn.A_d[axis, 3 + axis] == pytest.approx(_kernel_i0(k_d, dt), rel=1e-12)
        assert dyn.A_d[3 + axis, 3 + axis] == pytest.approx(math.exp(-k_d * dt), rel=1e-12)


@pytest.mark.parametrize("k_d", [0.0, 0.3])
def test_hover_fixed_point(k_d):
    model = QuadModel(m=0.35, k_d=k_d)
    dyn = discretize_foh(model, t_f=4.0, K=30)
    x = np.array([1.0, -2.0, 0.5, 0.0, 0.0, 0.0])
    u = model.hover_control()
    x_next = dyn.step(x, u, u)
    assert np.allclose(x_next, x, rtol=0, atol=1e-12)


def test_hover_dense_constant():
    model = QuadModel(m=0.35, k_d=0.0)
    x0 = np.array([0.3, 1.0, -1.0, 0.0, 0.0, 0.0])
    u = model.hover_control()
    traj = propagate_dense(model, x0, u, u, dt=0.5, samples=40)
    assert np.allclose(traj, x0[None, :], rtol=0, atol=1e-12)


def test_free_fall_parabola():
    model = QuadModel(m=0.35, k_d=0.0, g=9.81)
    x0 = np.array([10.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    zero = np.zeros(3)
    dt = 0.8
    traj = propagate_dense(model, x0, zero, zero, dt=dt, samples=25)
    t = np.linspace(0, dt, 25)
    assert np.allclose(traj[:, 0], 10.0 - 9.81 * t**2 / 2, rtol=1e-12, atol=1e-12)
    assert np.allclose(traj[:, 3], -9.81 * t, rtol=1e-12, atol=1e-12)
    assert np.allclose(traj[:, [1, 2, 4, 5]], 0.0)


@pytest.mark.parametrize("k_d", [0.0, 1e-6, 0.1, 0.5])
def test_endpoint_consistency(k_d):
    # dense closed forms and the augmented-exponential one-step map agree
    rng = np.random.default_rng(7)
    model = QuadModel(m=0.35, k_d=k_d)
    for _ in range(200):
        dt = rng.uniform(0.05, 0.5)
        x0 = rng.normal(scale=3.0, size=6)
        u0 = rng.normal(scale=4.0, size=3)
        u1 = rng.normal(scale=4.0, size=3)
        dyn = discretize_foh(model, t_f=dt, K=2)
        x_map = dyn.step(x0, u0, u1)
        x_dense = propagate_dense(model, x0, u0, u1, dt, samples=3)[-1]
        err = np.abs(x_map - x_dense)
        assert np.all(err <= 1e-9 * (1 + np.abs(x_map)))


def test_endpoint_consistency_planar():
    rng = np.random.default_rng(11)
    model = QuadModel(m=0.35, k_d=0.2, spatial_dim=2)
    for _ in range(100):
        dt = rng.uniform(0.05, 0.5)
        x0 = rng.normal(scale=2.0, size=4)
        u0 = rng.normal(scale=3.0, size=2)
        u1 = rng.normal(scale=3.0, size=2)
        dyn = discretize_foh(model, t_f=dt, K=2)
        err = np.abs(dyn.step(x0, u0, u1) - propagate_dense(model, x0, u0, u1, dt, 3)[-1])
        assert np.all(err <= 1e-9)


def test_drag_decay_monotone():
    # no thrust, no gravity term in the planar model: speed decays
    model = QuadModel(m=0.35, k_d=0.4, spatial_dim=2)
    x0 = np.array([0.0, 0.0, 1.5, -2.0])
    zero = np.zeros(2)
    traj = propagate_dense(model, x0, zero, zero, dt=3.0, samples=60)
    speed = np.linalg.norm(traj[:, 2:], axis=1)
    assert np.all(np.diff(speed) <= 1e-12)


def test_series_branch_matches_closed_form():
    # straddle the small-argument switch: nearby drag values give nearby states
    model_a = QuadModel(m=0.35, k_d=9.9e-3)
    model_b = QuadModel(m=0.35, k_d=1.01e-2)
    x0 = np.array([1.0, 2.0, 3.0, -1.0, 0.5, 0.25])
    u0 = np.array([3.0, 0.2, -0.1])
    u1 = np.array([3.5, -0.2, 0.4])
    a = propagate_dense(model_a, x0, u0, u1, dt=1.0, samples=11)
    b = propagate_dense(model_b, x0, u0, u1, dt=1.0, samples=11)
    assert np.allclose(a, b, rtol=0, atol=1e-3)
    # and each branch agrees with the matrix-exponential route
    for model in (model_a, model_b):
        dyn = discretize_foh(model, t_f=1.0, K=2)
        end = propagate_dense(model, x0, u0, u1, 1.0, 2)[-1]
        assert np.allclose(dyn.step(x0, u0, u1), end, rtol=1e-10, atol=1e-12)


def test_preconditions_rejected():
    model = QuadModel()
    with pytest.raises(ValueError):
        discretize_foh(model, t_f=4.0, K=1)
    with pytest.raises(ValueError):
        discretize_foh(model, t_f=0.0, K=10)
    with pytest.raises(ValueError):
        propagate_dense(model, np.zeros(6), np.zeros(3), np.zeros(3), 0.1, samples=1)
    with pytest.raises(ValueError):
        QuadModel(m=-1.0)
    with pytest.raises(ValueError):
        QuadModel(k_d=-0.1)
    with pytest.raises(ValueError):
        QuadModel(spatial_dim=4)


def test_cone_hover_thrust_feasible():
    model = QuadModel(m=0.35, g=9.81)
    params = ControlSetParams(T_min=2.0, T_max=5.0, theta_max=math.radians(45))
    cone = build_control_cone(params, model)
    mg = 0.35 * 9.81
    assert mg == pytest.approx(3.4335)
    assert cone.contains(np.array([mg, 0.0, 0.0]))
    assert cone.gamma_min == 2.0 and cone.gamma_max == 5.0


def test_cone_orthogonal_thrust_infeasible():
    cone = build_control_cone(ControlSetParams(), QuadModel())
    assert not cone.contains(np.array([0.0, 5.0, 0.0]))


def test_cone_thrust_bounds():
    cone = build_control_cone(ControlSetParams(), QuadModel())
    assert not cone.contains(np.array([1.0, 0.0, 0.0]))   # below T_min
    assert not cone.contains(np.array([6.0, 0.0, 0.0]))   # above T_max
    assert cone.contains(np.array([4.0, 1.0, 1.0]))


def test_planar_disk_radius():
    model = QuadModel(m=0.35, g=9.81, spatial_dim=2)
    params = ControlSetParams(T_min=2.0, T_max=5.0, theta_max=math.radians(45))
    cone = build_control_cone(params, model)
    mg = 0.35 * 9.81
    assert cone.gamma_max == pytest.approx(min(math.sqrt(25 - mg**2), mg), abs=1e-12)
    assert cone.gamma_max == pytest.approx(3.4335, abs=1e-4)
    assert cone.gamma_min is None and cone.tilt_cos is None


def test_planar_radius_against_3d_sweep():
    # a horizontal thrust is admissible in the disk iff the lifted 3-D
    # vector (m g, u_horizontal) satisfies the full thrust and tilt limits
    model3 = QuadModel(m=0.35, g=9.81)
    model2 = QuadModel(m=0.35, g=9.81, spatial_dim=2)
    params = ControlSetParams(T_min=2.0, T_max=5.0, theta_max=math.radians(45))
    cone3 = build_control_cone(params, model3)
    disk = build_control_cone(params, model2)
    mg = 0.35 * 9.81
    rng = np.random.default_rng(3)
    for _ in range(500):
        ang = rng.uniform(0, 2 * math.pi)
        mag = rng.uniform(0, 1.3 * disk.gamma_max)
        if abs(mag - disk.gamma_max) < 1e-9:
            continue
        u_h = mag * np.array([math.cos(ang), math.sin(ang)])
        lifted = np.array([mg, u_h[0], u_h[1]])
        assert disk.contains(u_h) == cone3.contains(lifted)


def test_altitude_hold_rejection():
    params = ControlSetParams(T_min=2.0, T_max=5.0, altitude_hold=True)
    with pytest.raises(ValueError):
        build_control_cone(params, QuadModel(m=0.1))    # m g < T_min
    with pytest.raises(ValueError):
        build_control_cone(params, QuadModel(m=0.6))    # m g > T_max
    with pytest.raises(ValueError):
        build_control_cone(ControlSetParams(), QuadModel(m=0.1, spatial_dim=2))
    cone = build_control_cone(params, QuadModel(m=0.35))
    assert cone.hold_value == pytest.approx(0.35 * 9.81)
    assert cone.contains(np.array([0.35 * 9.81, 1.0, -1.0]))
    assert not cone.contains(np.array([4.0, 1.0, -1.0]))


def test_membership_axisymmetric():
    cone = build_control_cone(ControlSetParams(), QuadModel())
    rng = np.random.default_rng(5)
    for _ in range(200):
        u = rng.normal(scale=3.0, size=3)
        base = cone.contains(u)
        phi = rng.uniform(0, 2 * math.pi)
        c, s = math.cos(phi), math.sin(phi)
        R = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
        assert cone.contains(R @ u) == base


def test_param_validation():
    with pytest.raises(ValueError):
        ControlSetParams(T_min=0.0)
    with pytest.raises(ValueError):
        ControlSetParams(T_min=6.0, T_max=5.0)
    with pytest.raises(ValueError):
        ControlSetParams(theta_max=0.0)
