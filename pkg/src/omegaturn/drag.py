"""Quasi-static Coulomb drag: force/torque balance for the body velocity.

Every sample point on the body carries a share ``w_p`` of a unit normal
load and feels the regularized Coulomb force

    F_p = -mu * w_p * v_p / sqrt(|v_p|^2 + eps^2).

The balanced body velocity minimizes the (strictly convex) dissipation
``D(xi) = sum_p mu * w_p * sqrt(|v_p|^2 + eps^2)``; the net wrench is
``-grad D``.  Newton's method with backtracking on ``D`` is run on whole
batches of states at once, which is what makes cycle integration cheap:
the body velocity at each instant depends only on shape and shape rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .chain import ChainGeometry, body_points, check_shape, sample_offsets

MAX_ITER = 100
WRENCH_TOL = 1e-9


class NonConvergence(RuntimeError):
    """Raised when the balance solve fails to reach tolerance."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


@dataclass(frozen=True)
class FrictionModel:
    mu: float = 0.3
    epsilon: float = 1e-8
    samples_per_link: int = 3

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.samples_per_link < 1:
            raise ValueError("samples_per_link must be >= 1")


@dataclass(frozen=True)
class BodyVelocity:
    xi_x: float
    xi_y: float
    xi_theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xi_x, self.xi_y, self.xi_theta])


def point_drag(v, model: FrictionModel) -> np.ndarray:
    """Regularized Coulomb force on a unit-load point moving at ``v``."""
    v = np.asarray(v, dtype=float)
    s = np.sqrt(np.sum(v * v, axis=-1, keepdims=True) + model.epsilon ** 2)
    return -model.mu * v / s


def contact_cloud(theta, theta_dot, geom: ChainGeometry, model: FrictionModel):
    """Flattened sample points, shape-induced velocities and weights.

    Returns ``points (..., P, 2)``, ``velocities (..., P, 2)`` and ``weights (P,)``
    with weights summing to one.
    """
    offsets, w = sample_offsets(model.samples_per_link, geom.link_length)
    pts, vel = body_points(theta, theta_dot, geom, offsets)
    lead = pts.shape[:-3]
    p = pts.shape[-3] * pts.shape[-2]
    weights = np.tile(w, geom.num_links) / geom.num_links
    return pts.reshape(lead + (p, 2)), vel.reshape(lead + (p, 2)), weights


def rigid_velocity(points, xi):
    """Velocity of body-frame ``points`` under body twist ``xi`` (batched)."""
    xi = np.asarray(xi, dtype=float)
    vx = xi[..., None, 0] - xi[..., None, 2] * points[..., 1]
    vy = xi[..., None, 1] + xi[..., None, 2] * points[..., 0]
    return np.stack([vx, vy], axis=-1)


def cloud_wrench(points, shape_vel, weights, xi, mu, eps):
    """Net drag wrench ``(Fx, Fy, Tz)`` about the body origin for a point cloud."""
    v = rigid_velocity(points, xi) + shape_vel
    s = np.sqrt(np.sum(v * v, axis=-1) + eps * eps)
    f = -mu * (weights / s)[..., None] * v
    torque = np.sum(points[..., 0] * f[..., 1] - points[..., 1] * f[..., 0], axis=-1)
    return np.concatenate([f.sum(axis=-2), torque[..., None]], axis=-1)


# Contacts are rows (px, py, vx0, vy0, nx, ny, f0): a point with shape-induced
# velocity (vx0, vy0) touching an obstacle whose unit normal n points into
# the body.  The contact is a spring-damper that never pulls,
# F = max(0, f0 - c * n.v) n, with f0 the spring force and c the damping.
# Its potential (c / 2) * min(0, n.v - f0 / c)^2 is convex and bounded
# below, so the balance keeps a unique solution whatever the spring load.

@njit(cache=True)
def _potential(px, py, vx0, vy0, w, cont, damp, xi0, xi1, xi2, eps2):
    d = 0.0
    for p in range(px.shape[0]):
        vx = xi0 - xi2 * py[p] + vx0[p]
        vy = xi1 + xi2 * px[p] + vy0[p]
        d += w[p] * np.sqrt(vx * vx + vy * vy + eps2)
    for c in range(cont.shape[0]):
        vx = xi0 - xi2 * cont[c, 1] + cont[c, 2]
        vy = xi1 + xi2 * cont[c, 0] + cont[c, 3]
        slack = cont[c, 4] * vx + cont[c, 5] * vy - cont[c, 6] / damp
        if slack < 0.0:
            d += 0.5 * damp * slack * slack
    return d


@njit(cache=True)
def _gradient(px, py, vx0, vy0, w, cont, damp, xi0, xi1, xi2, eps2, grad, hess):
    """Gradient (minus the net wrench) and Hessian of the balance potential."""
    for a in range(3):
        grad[a] = 0.0
        for b in range(3):
            hess[a, b] = 0.0
    for p in range(px.shape[0]):
        vx = xi0 - xi2 * py[p] + vx0[p]
        vy = xi1 + xi2 * px[p] + vy0[p]
        s = np.sqrt(vx * vx + vy * vy + eps2)
        f_x = -w[p] * vx / s
        f_y = -w[p] * vy / s
        grad[0] -= f_x
        grad[1] -= f_y
        grad[2] -= px[p] * f_y - py[p] * f_x
        ux = vx / s
        uy = vy / s
        c = w[p] / s
        kxx = c * (1.0 - ux * ux)
        kxy = -c * ux * uy
        kyy = c * (1.0 - uy * uy)
        gx2 = -py[p]
        gy2 = px[p]
        hess[0, 0] += kxx
        hess[0, 1] += kxy
        hess[1, 1] += kyy
        hess[0, 2] += kxx * gx2 + kxy * gy2
        hess[1, 2] += kxy * gx2 + kyy * gy2
        hess[2, 2] += gx2 * (kxx * gx2 + kxy * gy2) + gy2 * (kxy * gx2 + kyy * gy2)
    for k in range(cont.shape[0]):
        cx = cont[k, 0]
        cy = cont[k, 1]
        nx = cont[k, 4]
        ny = cont[k, 5]
        vx = xi0 - xi2 * cy + cont[k, 2]
        vy = xi1 + xi2 * cx + cont[k, 3]
        slack = nx * vx + ny * vy - cont[k, 6] / damp
        if slack < 0.0:
            mag = -damp * slack
            g0 = nx
            g1 = ny
            g2 = cx * ny - cy * nx
            grad[0] -= mag * g0
            grad[1] -= mag * g1
            grad[2] -= mag * g2
            hess[0, 0] += damp * g0 * g0
            hess[0, 1] += damp * g0 * g1
            hess[1, 1] += damp * g1 * g1
            hess[0, 2] += damp * g0 * g2
            hess[1, 2] += damp * g1 * g2
            hess[2, 2] += damp * g2 * g2
    hess[1, 0] = hess[0, 1]
    hess[2, 0] = hess[0, 2]
    hess[2, 1] = hess[1, 2]


@njit(cache=True)
def _residual(grad, inv_len):
    return np.sqrt(grad[0] ** 2 + grad[1] ** 2 + (grad[2] * inv_len) ** 2)


@njit(cache=True)
def _newton(px, py, vx0, vy0, w, cont, damp, x, eps2, inv_len, tol, max_iter, grad, hess, tgrad, thess):
    """Damped Newton on one state, updating ``x`` in place; returns (residual, iterations)."""
    _gradient(px, py, vx0, vy0, w, cont, damp, x[0], x[1], x[2], eps2, grad, hess)
    res = _residual(grad, inv_len)
    it = 0
    while it < max_iter and res > tol:
        it += 1
        step = -np.linalg.solve(hess + 1e-14 * np.eye(3), grad)
        d0 = _potential(px, py, vx0, vy0, w, cont, damp, x[0], x[1], x[2], eps2)
        a = 1.0
        accepted = False
        t0 = x[0]
        t1 = x[1]
        t2 = x[2]
        for _k in range(60):
            t0 = x[0] + a * step[0]
            t1 = x[1] + a * step[1]
            t2 = x[2] + a * step[2]
            d1 = _potential(px, py, vx0, vy0, w, cont, damp, t0, t1, t2, eps2)
            if d1 < d0:
                accepted = True
            elif d1 <= d0 + 1e-13 * abs(d0):
                # flat to roundoff near a sticking point; let the wrench decide
                _gradient(px, py, vx0, vy0, w, cont, damp, t0, t1, t2, eps2, tgrad, thess)
                accepted = _residual(tgrad, inv_len) < res
            if accepted:
                break
            a *= 0.5
        if not accepted:
            break
        x[0] = t0
        x[1] = t1
        x[2] = t2
        _gradient(px, py, vx0, vy0, w, cont, damp, x[0], x[1], x[2], eps2, grad, hess)
        res = _residual(grad, inv_len)
    return res, it


@njit(cache=True)
def _solve_kernel(points, shape_vel, weights, contacts, damp, eps, inv_len, tol, max_iter, xi_init):
    nb = points.shape[0]
    xi_out = np.empty((nb, 3))
    res_out = np.empty(nb)
    grad = np.empty(3)
    hess = np.empty((3, 3))
    tgrad = np.empty(3)
    thess = np.empty((3, 3))
    x = np.empty(3)
    for b in range(nb):
        px = points[b, :, 0].copy()
        py = points[b, :, 1].copy()
        vx0 = shape_vel[b, :, 0].copy()
        vy0 = shape_vel[b, :, 1].copy()
        w = weights[b]
        cont = contacts[b]
        x[:] = xi_init[b]
        # continuation: start from a smoothing tied to the typical point speed
        speed = 0.0
        for p in range(px.shape[0]):
            speed += w[p] * np.sqrt(vx0[p] ** 2 + vy0[p] ** 2)
        stage = max(eps, 0.1 * speed)
        budget = max_iter
        res = np.inf
        while True:
            final = stage <= eps
            stage_tol = tol if final else 1e-4
            res, used = _newton(px, py, vx0, vy0, w, cont, damp, x, stage * stage, inv_len,
                                stage_tol, budget, grad, hess, tgrad, thess)
            budget -= used
            if final or budget <= 0:
                break
            stage = max(eps, stage * 0.1)
        if stage > eps:
            res = np.inf
        xi_out[b, 0] = x[0]
        xi_out[b, 1] = x[1]
        xi_out[b, 2] = x[2]
        res_out[b] = res
    return xi_out, res_out


def solve_cloud(points, shape_vel, weights, mu, eps, length_scale, contacts=None, contact_damping=0.0,
                tol=WRENCH_TOL, max_iter=MAX_ITER, xi0=None):
    """Batched damped-Newton solve of the drag balance.

    ``weights`` is ``(P,)`` or per state ``(..., P)``.  ``contacts`` is an
    optional ``(..., C, 7)`` array of obstacle contacts (see the row layout
    above); forces there are in newtons and ``contact_damping`` in N s/m.
    The drag itself is solved with ``mu == 1`` and contact terms divided by
    ``mu``, which leaves the zero set unchanged.  Returns ``(xi, residual)``
    where the residual is the normalized wrench norm (force / mu, torque /
    (mu * length_scale)).
    """
    points = np.asarray(points, dtype=float)
    damp = float(contact_damping) / mu if contact_damping > 0 else 1.0
    lead = points.shape[:-2]
    p = points.shape[-2]
    flat_pts = np.ascontiguousarray(points.reshape((-1, p, 2)))
    nb = flat_pts.shape[0]
    flat_vel = np.ascontiguousarray(np.broadcast_to(shape_vel, points.shape).reshape((nb, p, 2)))
    w = np.ascontiguousarray(np.broadcast_to(np.asarray(weights, dtype=float), lead + (p,)).reshape((nb, p)))
    if contacts is None or np.asarray(contacts).shape[-2] == 0:
        cont = np.zeros((nb, 0, 7))
    else:
        contacts = np.asarray(contacts, dtype=float)
        cont = np.ascontiguousarray(
            np.broadcast_to(contacts, lead + contacts.shape[-2:]).reshape((nb,) + contacts.shape[-2:]))
        if contact_damping <= 0:
            raise ValueError("contacts need a positive contact_damping")
        cont = cont.copy()
        cont[..., 6] /= mu
    if xi0 is None:
        init = np.zeros((nb, 3))
    else:
        init = np.ascontiguousarray(np.broadcast_to(xi0, lead + (3,)).reshape((nb, 3)), dtype=float)
    xi, res = _solve_kernel(flat_pts, flat_vel, w, cont, damp, float(eps),
                            1.0 / length_scale, float(tol), int(max_iter), init)
    return xi.reshape(lead + (3,)), res.reshape(lead)


def net_wrench(shape, shape_rate, xi, model: FrictionModel, geom: ChainGeometry):
    """Net ground-reaction wrench ``(Fx, Fy, Tz)`` about the body origin."""
    theta = check_shape(shape)
    pts, vel, w = contact_cloud(theta, np.asarray(shape_rate, dtype=float), geom, model)
    xi = xi.as_array() if isinstance(xi, BodyVelocity) else np.asarray(xi, dtype=float)
    return cloud_wrench(pts, vel, w, xi, model.mu, model.epsilon)


def solve_batch(theta, theta_dot, model: FrictionModel, geom: ChainGeometry, raise_on_failure=True):
    """Body velocities ``(..., 3)`` for batches of shapes and shape rates."""
    pts, vel, w = contact_cloud(theta, theta_dot, geom, model)
    xi, res = solve_cloud(pts, vel, w, model.mu, model.epsilon, geom.body_length)
    if raise_on_failure and np.any(res > WRENCH_TOL):
        bad = int(np.argmax(np.ravel(res)))
        raise NonConvergence(f"drag balance did not converge (residual {np.ravel(res)[bad]:.3e})",
                             residual=float(np.ravel(res)[bad]), index=bad)
    return xi


def solve_body_velocity(shape, shape_rate, model: FrictionModel, geom: ChainGeometry) -> BodyVelocity:
    theta = check_shape(shape)
    xi = solve_batch(theta, np.asarray(shape_rate, dtype=float), model, geom)
    return BodyVelocity(*map(float, xi))


def local_connection(shape, model: FrictionModel, geom: ChainGeometry) -> np.ndarray:
    """3 x N matrix whose column ``j`` is the body velocity for a unit rate on joint ``j``."""
    theta = check_shape(shape)
    n = theta.size
    rates = np.eye(n)
    try:
        xi = solve_batch(np.broadcast_to(theta, (n, n)), rates, model, geom)
    except NonConvergence as exc:
        raise NonConvergence(f"local connection column {exc.index} failed: {exc}",
                             residual=exc.residual, index=exc.index) from exc
    return xi.T.copy()


def connection_batch(theta, model: FrictionModel, geom: ChainGeometry) -> np.ndarray:
    """Local connections ``(..., 3, N)`` for a batch of shapes."""
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[-1]
    shapes = np.broadcast_to(theta[..., None, :], theta.shape[:-1] + (n, n))
    rates = np.broadcast_to(np.eye(n), shapes.shape)
    xi = solve_batch(shapes, rates, model, geom)
    return np.swapaxes(xi, -1, -2)
