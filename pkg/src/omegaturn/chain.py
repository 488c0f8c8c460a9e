"""Planar chain of rectangular links: kinematics, self-collision, feasibility.

Links are numbered 0..N and joints 1..N; joint ``i`` sits between link
``i - 1`` and link ``i`` so that ``heading[i] - heading[i-1] == theta[i-1]``
(``theta`` is stored zero-based).  Everything returned here is expressed in
the body frame: origin at the mean of the link centers, x-axis along the
arithmetic mean of the link headings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class ChainGeometry:
    num_joints: int = 8
    link_length: float = 0.07
    link_width: float = 0.05

    def __post_init__(self):
        if self.num_joints < 2:
            raise ValueError("num_joints must be >= 2")
        if self.link_length <= 0 or self.link_width <= 0:
            raise ValueError("link dimensions must be positive")

    @property
    def num_links(self) -> int:
        return self.num_joints + 1

    @property
    def body_length(self) -> float:
        return self.num_links * self.link_length


@dataclass(frozen=True)
class FeasibilitySpec:
    theta_max: float = np.pi / 2
    collision_margin: float = 0.0

    def __post_init__(self):
        if not 0 < self.theta_max <= np.pi:
            raise ValueError("theta_max must lie in (0, pi]")
        if self.collision_margin < 0:
            raise ValueError("collision_margin must be >= 0")


@dataclass(frozen=True)
class LinkPose:
    center: tuple[float, float]
    heading: float


def check_shape(shape) -> np.ndarray:
    """Validate a joint-angle vector and return it as a float array."""
    theta = np.asarray(shape, dtype=float)
    if theta.ndim != 1:
        raise ValueError("shape must be a 1-D vector of joint angles")
    if not np.all(np.isfinite(theta)):
        raise ValueError("joint angles must be finite")
    if np.any(np.abs(theta) > np.pi + 1e-12):
        raise ValueError("joint angles must satisfy |theta_i| <= pi")
    return theta


def _perp(v):
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def _raw_chain(theta, link_length):
    # theta: (..., N). Headings of links 0..N with link 0 at zero, and joint
    # points p_0..p_{N+1} (p_i is joint i for 1 <= i <= N).
    theta = np.asarray(theta, dtype=float)
    zeros = np.zeros(theta.shape[:-1] + (1,))
    headings = np.concatenate([zeros, np.cumsum(theta, axis=-1)], axis=-1)
    steps = link_length * np.stack([np.cos(headings), np.sin(headings)], axis=-1)
    points = np.concatenate([np.zeros(theta.shape[:-1] + (1, 2)), np.cumsum(steps, axis=-2)], axis=-2)
    return headings, points


def _rotate(v, angle):
    c = np.cos(angle)[..., None]
    s = np.sin(angle)[..., None]
    return np.stack([c[..., 0] * v[..., 0] - s[..., 0] * v[..., 1],
                     s[..., 0] * v[..., 0] + c[..., 0] * v[..., 1]], axis=-1)


def link_frames(theta, geom: ChainGeometry):
    """Batched body-frame link centers ``(..., N+1, 2)`` and headings ``(..., N+1)``."""
    headings, points = _raw_chain(theta, geom.link_length)
    centers = 0.5 * (points[..., :-1, :] + points[..., 1:, :])
    mean_heading = headings.mean(axis=-1)
    centroid = centers.mean(axis=-2)
    rel = centers - centroid[..., None, :]
    body_centers = _rotate(rel, -mean_heading[..., None])
    return body_centers, headings - mean_heading[..., None]


def forward_kinematics(shape, geom: ChainGeometry) -> list[LinkPose]:
    theta = check_shape(shape)
    if theta.size != geom.num_joints:
        raise ValueError(f"expected {geom.num_joints} joint angles, got {theta.size}")
    centers, headings = link_frames(theta, geom)
    return [LinkPose((float(c[0]), float(c[1])), float(h)) for c, h in zip(centers, headings)]


def sample_offsets(samples_per_link: int, link_length: float):
    """Offsets along a link midline and trapezoid weights summing to one."""
    if samples_per_link == 1:
        return np.zeros(1), np.ones(1)
    s = np.linspace(-0.5, 0.5, samples_per_link) * link_length
    w = np.ones(samples_per_link)
    w[0] = w[-1] = 0.5
    return s, w / w.sum()


def body_points(theta, theta_dot, geom: ChainGeometry, offsets):
    """Body-frame sample points along every link and their shape-induced velocities.

    ``theta`` and ``theta_dot`` have shape ``(..., N)``; ``offsets`` are
    positions along each link midline relative to the link center.  Returns
    ``(points, velocities)`` each of shape ``(..., N+1, S, 2)``.
    """
    offsets = np.asarray(offsets, dtype=float)
    s = offsets.size
    links = np.repeat(np.arange(geom.num_links), s)
    local = np.column_stack([np.tile(offsets, geom.num_links), np.zeros(links.size)])
    pts, vel = material_points(theta, theta_dot, geom, links, local)
    shape = pts.shape[:-2] + (geom.num_links, s, 2)
    return pts.reshape(shape), vel.reshape(shape)


def link_corners(theta, geom: ChainGeometry, margin: float = 0.0):
    """Body-frame rectangle corners per link, shape ``(..., N+1, 4, 2)``, CCW order."""
    centers, headings = link_frames(theta, geom)
    hl = 0.5 * geom.link_length + margin
    hw = 0.5 * geom.link_width + margin
    local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    c = np.cos(headings)[..., None]
    s = np.sin(headings)[..., None]
    x = c * local[:, 0] - s * local[:, 1]
    y = s * local[:, 0] + c * local[:, 1]
    return centers[..., None, :] + np.stack([x, y], axis=-1)


def rectangles_overlap(a, b):
    """Separating-axis test for batches of convex quadrilaterals ``(..., 4, 2)``.

    Touching boundaries count as overlap.
    """
    axes = []
    for poly in (a, b):
        edges = np.roll(poly, -1, axis=-2) - poly
        axes.append(_perp(edges))
    axes = np.concatenate(axes, axis=-2)  # (..., 8, 2)
    pa = np.einsum("...kd,...md->...km", axes, a)
    pb = np.einsum("...kd,...md->...km", axes, b)
    separated = (pa.max(-1) < pb.min(-1)) | (pb.max(-1) < pa.min(-1))
    return ~np.any(separated, axis=-1)


@njit(cache=True)
def _separated(a, b):
    for poly in (a, b):
        for e in range(4):
            ax = -(poly[(e + 1) % 4, 1] - poly[e, 1])
            ay = poly[(e + 1) % 4, 0] - poly[e, 0]
            amin = np.inf
            amax = -np.inf
            bmin = np.inf
            bmax = -np.inf
            for k in range(4):
                pa = ax * a[k, 0] + ay * a[k, 1]
                pb = ax * b[k, 0] + ay * b[k, 1]
                amin = min(amin, pa)
                amax = max(amax, pa)
                bmin = min(bmin, pb)
                bmax = max(bmax, pb)
            if amax < bmin or bmax < amin:
                return True
    return False


@njit(cache=True)
def _collide_kernel(corners, centers, reach):
    nb, nl = corners.shape[0], corners.shape[1]
    out = np.zeros(nb, dtype=np.bool_)
    for b in range(nb):
        for i in range(nl):
            for j in range(i + 2, nl):
                dx = centers[b, i, 0] - centers[b, j, 0]
                dy = centers[b, i, 1] - centers[b, j, 1]
                if dx * dx + dy * dy > reach * reach:
                    continue
                if not _separated(corners[b, i], corners[b, j]):
                    out[b] = True
                    break
            if out[b]:
                break
    return out


def self_collides_batch(theta, geom: ChainGeometry, margin: float = 0.0) -> np.ndarray:
    """Whether any two non-adjacent links overlap, for shapes ``(..., N)``."""
    theta = np.asarray(theta, dtype=float)
    lead = theta.shape[:-1]
    corners = link_corners(theta, geom, margin).reshape((-1, geom.num_links, 4, 2))
    centers = corners.mean(axis=-2)
    # two rectangles whose centers are further apart than twice the half-diagonal cannot touch
    reach = 2.0 * np.hypot(0.5 * geom.link_length + margin, 0.5 * geom.link_width + margin)
    return _collide_kernel(np.ascontiguousarray(corners), np.ascontiguousarray(centers), reach).reshape(lead)


def self_collides(shape, geom: ChainGeometry, margin: float = 0.0) -> bool:
    theta = check_shape(shape)
    return bool(self_collides_batch(theta, geom, margin))


def feasible_batch(theta, spec: FeasibilitySpec, geom: ChainGeometry) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    within = np.all(np.abs(theta) <= spec.theta_max, axis=-1)
    return within & ~self_collides_batch(theta, geom, spec.collision_margin)


def is_feasible(shape, spec: FeasibilitySpec, geom: ChainGeometry) -> bool:
    theta = check_shape(shape)
    return bool(feasible_batch(theta, spec, geom))


def material_points(theta, theta_dot, geom: ChainGeometry, links, local):
    """Body-frame positions and shape-induced velocities of points fixed to links.

    ``links`` (M,) picks the link of each point and ``local`` (M, 2) gives
    its (along, lateral) coordinates relative to that link's center.  With a
    unit rate on joint ``i`` the velocities are column ``i`` of the
    body-frame point Jacobian.
    """
    theta = np.asarray(theta, dtype=float)
    theta_dot = np.asarray(theta_dot, dtype=float)
    links = np.asarray(links, dtype=int)
    local = np.asarray(local, dtype=float).reshape(-1, 2)
    n = theta.shape[-1]
    headings, joints = _raw_chain(theta, geom.link_length)
    u = np.stack([np.cos(headings), np.sin(headings)], axis=-1)
    centers = 0.5 * (joints[..., :-1, :] + joints[..., 1:, :])
    q = centers[..., links, :] + local[:, 0:1] * u[..., links, :] + local[:, 1:2] * _perp(u[..., links, :])
    cum_rate = np.concatenate([np.zeros(theta.shape[:-1] + (1,)), np.cumsum(theta_dot, axis=-1)], axis=-1)
    weighted = theta_dot[..., :, None] * joints[..., 1:n + 1, :]
    cum_weighted = np.concatenate([np.zeros(theta.shape[:-1] + (1, 2)), np.cumsum(weighted, axis=-2)], axis=-2)
    q_dot = _perp(q * cum_rate[..., links, None] - cum_weighted[..., links, :])
    mean_heading = headings.mean(axis=-1)
    mean_rate = cum_rate.mean(axis=-1)
    centroid = centers.mean(axis=-2)
    c_dot = _perp(centers * cum_rate[..., :, None] - cum_weighted).mean(axis=-2)
    angle = -mean_heading[..., None]
    pts = _rotate(q - centroid[..., None, :], angle)
    vel = _rotate(q_dot - c_dot[..., None, :], angle) - mean_rate[..., None, None] * _perp(pts)
    return pts, vel


def point_jacobian(theta, geom: ChainGeometry, links, local) -> np.ndarray:
    """Body-frame Jacobian ``(M, 2, N)`` of link-fixed points w.r.t. the joint angles."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    _, vel = material_points(np.broadcast_to(theta, (n, n)), np.eye(n), geom, links, local)
    return np.transpose(vel, (1, 2, 0))
