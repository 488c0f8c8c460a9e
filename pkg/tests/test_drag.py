import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from omegaturn.chain import ChainGeometry
from omegaturn.drag import (WRENCH_TOL, FrictionModel, NonConvergence, cloud_wrench, connection_batch, contact_cloud,
                            local_connection, net_wrench, point_drag, solve_batch, solve_body_velocity, solve_cloud)

GEOM = ChainGeometry()
MODEL = FrictionModel()


def dissipation(xi, pts, vel, w, eps):
    v = vel + np.column_stack([xi[0] - xi[2] * pts[:, 1], xi[1] + xi[2] * pts[:, 0]])
    return np.sum(w * np.sqrt(np.sum(v * v, axis=1) + eps * eps))


def test_point_drag_is_opposed_and_bounded():
    f = point_drag(np.array([[3.0, 4.0], [0.0, 0.0]]), MODEL)
    assert np.allclose(f[0], -0.3 * np.array([0.6, 0.8]), atol=1e-9)
    assert np.allclose(f[1], 0.0)


def test_zero_rate_gives_zero_velocity(rng):
    xi = solve_body_velocity(rng.uniform(-1, 1, 8), np.zeros(8), MODEL, GEOM)
    assert np.allclose(xi.as_array(), 0.0, atol=1e-12)


def test_solution_minimizes_dissipation(rng):
    # independent oracle: generic quasi-Newton minimization of the same dissipation
    for _ in range(10):
        theta = rng.uniform(-1, 1, 8)
        rate = rng.uniform(-0.5, 0.5, 8)
        pts, vel, w = contact_cloud(theta, rate, GEOM, MODEL)
        xi = solve_body_velocity(theta, rate, MODEL, GEOM).as_array()
        eps = 1e-4  # smoother problem for the generic optimizer
        xi_s, _ = solve_cloud(pts, vel, w, MODEL.mu, eps, GEOM.body_length)
        res = minimize(dissipation, np.zeros(3), args=(pts, vel, w, eps), method="BFGS",
                       options={"gtol": 1e-12, "maxiter": 2000})
        assert np.allclose(xi_s, res.x, atol=1e-5)
        assert np.allclose(xi, xi_s, atol=1e-3)


def test_residual_below_tolerance_on_random_draws(rng):
    theta = rng.uniform(-np.pi / 2, np.pi / 2, (1000, 8))
    rate = rng.uniform(-1, 1, (1000, 8))
    pts, vel, w = contact_cloud(theta, rate, GEOM, MODEL)
    xi, res = solve_cloud(pts, vel, w, MODEL.mu, MODEL.epsilon, GEOM.body_length)
    assert np.all(res <= WRENCH_TOL)
    wrench = cloud_wrench(pts, vel, w, xi, MODEL.mu, MODEL.epsilon)
    scale = np.array([1, 1, 1 / GEOM.body_length]) / MODEL.mu
    assert np.all(np.linalg.norm(wrench * scale, axis=-1) <= 1e-9)


def test_net_wrench_vanishes_at_solution(rng):
    theta, rate = rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8)
    xi = solve_body_velocity(theta, rate, MODEL, GEOM)
    assert np.linalg.norm(net_wrench(theta, rate, xi, MODEL, GEOM)) < 1e-9


@given(st.floats(0.05, 2.0))
def test_mu_does_not_change_velocity(mu):
    theta = np.linspace(-0.8, 0.8, 8)
    rate = np.cos(np.arange(8))
    a = solve_body_velocity(theta, rate, MODEL, GEOM).as_array()
    b = solve_body_velocity(theta, rate, FrictionModel(mu=mu), GEOM).as_array()
    assert np.allclose(a, b, atol=1e-9)


@given(st.floats(0.5, 10.0))
def test_velocity_is_homogeneous_in_rate(c):
    # gait-scale rates; at very slow rates the regularization width becomes visible
    theta = np.linspace(-0.8, 0.8, 8)
    rate = np.sin(np.arange(8) + 0.3)
    a = solve_body_velocity(theta, rate, MODEL, GEOM).as_array()
    b = solve_body_velocity(theta, c * rate, MODEL, GEOM).as_array()
    assert np.allclose(c * a, b, rtol=1e-4, atol=1e-9)


def test_mirror_shape_mirrors_velocity(rng):
    theta, rate = rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8)
    a = solve_body_velocity(theta, rate, MODEL, GEOM).as_array()
    b = solve_body_velocity(-theta, -rate, MODEL, GEOM).as_array()
    assert np.allclose(b, a * np.array([1, -1, -1]), atol=1e-9)


def test_local_connection_columns(rng):
    theta = rng.uniform(-1, 1, 8)
    conn = local_connection(theta, MODEL, GEOM)
    assert conn.shape == (3, 8)
    for j in (0, 4, 7):
        e = np.zeros(8)
        e[j] = 1.0
        assert np.allclose(conn[:, j], solve_body_velocity(theta, e, MODEL, GEOM).as_array())
    assert np.allclose(connection_batch(theta[None], MODEL, GEOM)[0], conn)


def test_straight_chain_undulation_stays_in_plane_symmetry():
    # a symmetric rate on a straight body produces no rotation
    rate = np.array([1, -1, 1, -1, -1, 1, -1, 1], dtype=float)
    xi = solve_body_velocity(np.zeros(8), rate, MODEL, GEOM)
    assert abs(xi.xi_theta) < 1e-9


def test_iteration_budget_is_enforced(rng):
    theta, rate = rng.uniform(-1, 1, (4, 8)), rng.uniform(-1, 1, (4, 8))
    pts, vel, w = contact_cloud(theta, rate, GEOM, MODEL)
    _, res = solve_cloud(pts, vel, w, MODEL.mu, MODEL.epsilon, GEOM.body_length, max_iter=1)
    assert np.any(res > WRENCH_TOL)
    exc = NonConvergence("x", residual=1.0, index=2)
    assert exc.index == 2 and exc.residual == 1.0


def test_batch_shapes():
    theta = np.zeros((2, 3, 8))
    rate = np.ones((2, 3, 8))
    assert solve_batch(theta, rate, MODEL, GEOM).shape == (2, 3, 3)


def test_contacts_require_damping():
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(ValueError):
        solve_cloud(pts, np.zeros((2, 2)), np.full(2, 0.5), 0.3, 1e-6, 1.0,
                    contacts=np.array([[0, 0, 0, 0, 1, 0, 0.1]]), contact_damping=0.0)


def test_contact_push_moves_body_along_normal():
    pts = np.array([[-0.1, 0.0], [0.1, 0.0]])
    rows = np.array([[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.6]])
    xi, res = solve_cloud(pts, np.zeros((2, 2)), np.full(2, 0.5), 0.3, 1e-6, 0.2,
                          contacts=rows, contact_damping=10.0)
    # spring force 0.6 exceeds friction capacity 0.3; damper absorbs the rest: 0.6 - 10 v = 0.3
    assert res <= WRENCH_TOL
    assert np.allclose(xi, [0.03, 0.0, 0.0], atol=1e-6)


def test_model_validation():
    with pytest.raises(ValueError):
        FrictionModel(mu=0)
    with pytest.raises(ValueError):
        FrictionModel(epsilon=0)
    with pytest.raises(ValueError):
        FrictionModel(samples_per_link=0)
