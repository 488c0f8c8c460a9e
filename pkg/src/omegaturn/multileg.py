"""Elongate multi-legged robot turning over the (phi, w3) shape space.

The body is a planar chain of segments joined by yaw joints, one leg pair
per segment.  A single phase ``phi`` drives three synchronized waves (body
undulation, leg protraction/retraction and leg contact); ``w3`` is an offset
added to every body joint.  Stance feet and body segments feel regularized
Coulomb drag with separate friction coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainGeometry, link_frames, material_points
from .drag import BodyVelocity, NonConvergence, WRENCH_TOL, solve_cloud
from .gaits import TWO_PI
from .geomech import Axis, ConnectionField, HeightField, ShapeGrid, height_function, periodic_axis
from .simulate import Trajectory, TurnMetrics, integrate_twists, turn_metrics


STANCE_PATTERNS = ("antiphase", "paired")


@dataclass(frozen=True)
class MultilegGeometry:
    segments: int = 5
    segment_length: float = 0.08
    body_width: float = 0.04
    leg_offset: float = 0.02  # hip distance from the body midline
    leg_length: float = 0.06
    mu_leg: float = 0.3
    mu_body: float = 0.03
    duty_factor: float = 0.5
    body_amplitude: float = np.radians(30.0)
    leg_amplitude: float = np.radians(30.0)
    epsilon: float = 1e-8
    stance_pattern: str = "antiphase"  # or "paired": both legs of a segment share one contact state

    def __post_init__(self):
        if self.stance_pattern not in STANCE_PATTERNS:
            raise ValueError(f"stance_pattern must be one of {STANCE_PATTERNS}")
        if self.segments < 3:
            raise ValueError("need at least 3 segments")
        if not 0 < self.duty_factor < 1:
            raise ValueError("duty_factor must lie in (0, 1)")
        if not self.mu_leg > self.mu_body >= 0:
            raise ValueError("require mu_leg > mu_body >= 0")
        if min(self.segment_length, self.body_width, self.leg_length) <= 0 or self.leg_offset < 0:
            raise ValueError("lengths must be positive")

    @property
    def body_joints(self) -> int:
        return self.segments - 1

    @property
    def legs(self) -> int:
        return 2 * self.segments

    @property
    def chain(self) -> ChainGeometry:
        return ChainGeometry(self.body_joints, self.segment_length, self.body_width)

    @property
    def body_length(self) -> float:
        return self.segments * self.segment_length

    @property
    def stance_threshold(self) -> float:
        # sin(x) > cos(pi * D) holds on a fraction D of each cycle
        return float(np.cos(np.pi * self.duty_factor))


@dataclass(frozen=True)
class MultilegShape:
    phi: float
    w3: float = 0.0

    def __post_init__(self):
        if not 0 <= self.phi < TWO_PI:
            raise ValueError("phi must lie in [0, 2*pi)")


def _segment_phase(geom: MultilegGeometry):
    return TWO_PI * np.arange(geom.segments) / geom.segments


def body_angles(phi, w3, geom: MultilegGeometry):
    """Body joint angles ``(..., J)`` and their partials in phi and w3."""
    phi = np.asarray(phi, dtype=float)[..., None]
    w3 = np.asarray(w3, dtype=float)[..., None]
    j = np.arange(1, geom.body_joints + 1)
    arg = phi + TWO_PI * j / geom.segments
    alpha = geom.body_amplitude * np.sin(arg) + w3
    d_phi = geom.body_amplitude * np.cos(arg)
    return alpha, d_phi, np.ones_like(alpha)


def leg_state(phi, geom: MultilegGeometry):
    """Protraction angles ``(..., S, 2)``, their phi-rates and stance flags (left, right).

    The contact wave lags the protraction wave by a quarter cycle, so a leg
    is in stance while it retracts.  Right legs protract in antiphase with
    the left ones.  With the ``antiphase`` pattern the right contact wave is
    also shifted half a cycle; with ``paired`` both legs of a segment share
    the left leg's contact state.
    """
    phi = np.asarray(phi, dtype=float)[..., None]
    arg = phi + _segment_phase(geom)
    beta_l = geom.leg_amplitude * np.sin(arg)
    dbeta_l = geom.leg_amplitude * np.cos(arg)
    contact = -np.cos(arg)
    thr = geom.stance_threshold
    beta = np.stack([beta_l, -beta_l], axis=-1)
    dbeta = np.stack([dbeta_l, -dbeta_l], axis=-1)
    left = contact > thr
    right = left if geom.stance_pattern == "paired" else -contact > thr
    stance = np.stack([left, right], axis=-1)
    return beta, dbeta, stance


def _foot_local(beta, geom: MultilegGeometry):
    # (along, lateral) foot offsets from the segment center; side +1 left, -1 right
    side = np.array([1.0, -1.0])
    along = geom.leg_length * np.sin(beta)
    lateral = side * (geom.leg_offset + geom.leg_length * np.cos(beta))
    return np.stack([along, lateral], axis=-1)


def multileg_configuration(s: MultilegShape, geom: MultilegGeometry):
    """Body joint angles, stance flags ``(S, 2)`` and body-frame foot positions ``(S, 2, 2)``."""
    alpha, _, _ = body_angles(s.phi, s.w3, geom)
    beta, _, stance = leg_state(s.phi, geom)
    centers, headings = link_frames(alpha, geom.chain)
    local = _foot_local(beta, geom)
    c, sn = np.cos(headings)[:, None], np.sin(headings)[:, None]
    feet = centers[:, None, :] + np.stack([c * local[..., 0] - sn * local[..., 1],
                                           sn * local[..., 0] + c * local[..., 1]], axis=-1)
    return alpha, stance, feet


def _cloud(phi, w3, phi_dot, w3_dot, geom: MultilegGeometry):
    """Drag points, shape velocities and weights for batches of states ``(...,)``.

    Every foot is included; swing feet get zero weight.
    """
    phi = np.asarray(phi, dtype=float)
    w3 = np.broadcast_to(np.asarray(w3, dtype=float), phi.shape)
    phi_dot = np.broadcast_to(np.asarray(phi_dot, dtype=float), phi.shape)
    w3_dot = np.broadcast_to(np.asarray(w3_dot, dtype=float), phi.shape)
    chain = geom.chain
    S = geom.segments
    alpha, da_phi, da_w3 = body_angles(phi, w3, geom)
    alpha_dot = da_phi * phi_dot[..., None] + da_w3 * w3_dot[..., None]
    beta, dbeta, stance = leg_state(phi, geom)
    # body points: segment centers
    links_b = np.arange(S)
    bp, bv = material_points(alpha, alpha_dot, chain, links_b, np.zeros((S, 2)))
    # feet: material points at the current foot offsets, plus the leg swing itself
    local = _foot_local(beta, geom).reshape(phi.shape + (2 * S, 2))
    links_f = np.repeat(np.arange(S), 2)
    flat_alpha = alpha.reshape(-1, alpha.shape[-1])
    flat_rate = alpha_dot.reshape(-1, alpha.shape[-1])
    flat_local = local.reshape(-1, 2 * S, 2)
    fp = np.empty((flat_alpha.shape[0], 2 * S, 2))
    fv = np.empty_like(fp)
    for b in range(flat_alpha.shape[0]):
        fp[b], fv[b] = material_points(flat_alpha[b], flat_rate[b], chain, links_f, flat_local[b])
    fp = fp.reshape(phi.shape + (2 * S, 2))
    fv = fv.reshape(phi.shape + (2 * S, 2))
    _, headings = link_frames(alpha, chain)
    h = np.repeat(headings, 2, axis=-1)
    side = np.tile([1.0, -1.0], S)
    db = dbeta.reshape(phi.shape + (2 * S,)) * phi_dot[..., None]
    b_flat = beta.reshape(phi.shape + (2 * S,))
    d_along = geom.leg_length * np.cos(b_flat) * db
    d_lat = -side * geom.leg_length * np.sin(b_flat) * db
    fv = fv + np.stack([np.cos(h) * d_along - np.sin(h) * d_lat,
                        np.sin(h) * d_along + np.cos(h) * d_lat], axis=-1)
    w_feet = geom.mu_leg * stance.reshape(phi.shape + (2 * S,)).astype(float)
    w_body = np.full(phi.shape + (S,), geom.mu_body)
    pts = np.concatenate([bp, fp], axis=-2)
    vel = np.concatenate([bv, fv], axis=-2)
    w = np.concatenate([w_body, w_feet], axis=-1)
    return pts, vel, w


def multileg_velocity_batch(phi, w3, phi_dot, w3_dot, geom: MultilegGeometry, raise_on_failure=True):
    pts, vel, w = _cloud(phi, w3, phi_dot, w3_dot, geom)
    # weights already carry the friction coefficients
    xi, res = solve_cloud(pts, vel, w, 1.0, geom.epsilon, geom.body_length)
    if raise_on_failure:
        bad = np.flatnonzero(~(np.asarray(res).ravel() <= WRENCH_TOL))
        if bad.size:
            k = int(bad[0])
            raise NonConvergence(f"balance residual {float(np.ravel(res)[k]):.3g} at state {k}",
                                 residual=float(np.ravel(res)[k]), index=k)
    return xi


def multileg_body_velocity(s: MultilegShape, shape_rate, geom: MultilegGeometry) -> BodyVelocity:
    """Body velocity for shape ``s`` and rates ``(phi_dot, w3_dot)``."""
    rate = np.asarray(shape_rate, dtype=float)
    xi = multileg_velocity_batch(s.phi, s.w3, rate[0], rate[1], geom)
    return BodyVelocity(*(float(x) for x in xi))


def multileg_connection(grid: ShapeGrid, geom: MultilegGeometry) -> ConnectionField:
    """Connection field over a ``(phi, w3)`` grid: columns are unit phi and w3 rates."""
    phi, w3 = grid.mesh()
    cols = [multileg_velocity_batch(phi, w3, 1.0, 0.0, geom),
            multileg_velocity_batch(phi, w3, 0.0, 1.0, geom)]
    values = np.stack(cols, axis=-1)
    return ConnectionField(grid, values, np.ones(grid.shape, dtype=bool))


def default_grid(cells: int = 64, w3_max: float = np.radians(30.0), w3_cells: int = 41) -> ShapeGrid:
    return ShapeGrid(periodic_axis("phi", cells), Axis("w3", -w3_max, w3_max, w3_cells))


def multileg_height_function(grid: ShapeGrid | None = None, geom: MultilegGeometry | None = None) -> HeightField:
    grid = grid or default_grid()
    geom = geom or MultilegGeometry()
    return height_function(multileg_connection(grid, geom), "rotational")


def stripe_bands(hf: HeightField, rel: float = 0.1):
    """Signed bands of the phi-profile of the height field (averaged over w3).

    Returns a list of ``(sign, start_index, end_index)`` runs around the
    periodic phi axis, counting only cells whose magnitude exceeds ``rel``
    times the peak.
    """
    prof = np.nanmean(hf.values, axis=1)
    peak = np.nanmax(np.abs(prof))
    if not peak > 0:
        return []
    sgn = np.where(np.abs(prof) > rel * peak, np.sign(prof), 0).astype(int)
    runs = []
    n = len(sgn)
    start = int(np.argmax(sgn == 0)) if np.any(sgn == 0) else 0
    k = 0
    while k < n:
        i = (start + k) % n
        if sgn[i] == 0:
            k += 1
            continue
        s0, first = sgn[i], i
        while k < n and sgn[(start + k) % n] == s0:
            k += 1
        runs.append((int(s0), first, (start + k - 1) % n))
    return runs


def multileg_trajectory(A3: float, omega: float, geom: MultilegGeometry, cycles: int = 1,
                        steps_per_cycle: int = 400) -> Trajectory:
    """Integrate ``phi = 2 pi omega t``, ``w3 = A3 sin(2 pi omega t)``."""
    period = 1.0 / omega
    dt = period / steps_per_cycle
    t_mid = (np.arange(steps_per_cycle) + 0.5) * dt
    tau = TWO_PI * omega * t_mid
    xi = multileg_velocity_batch(np.mod(tau, TWO_PI), A3 * np.sin(tau), np.full_like(tau, TWO_PI * omega),
                                 A3 * TWO_PI * omega * np.cos(tau), geom)
    xis = np.tile(xi, (cycles, 1))
    t = np.arange(steps_per_cycle * cycles + 1) * dt
    poses = integrate_twists(xis, dt)
    tau_all = TWO_PI * omega * t
    shapes, _, _ = body_angles(np.mod(tau_all, TWO_PI), A3 * np.sin(tau_all), geom)
    return Trajectory(t, poses, shapes, steps_per_cycle, xis)


def multileg_turn(A3: float, omega: float = 0.1, geom: MultilegGeometry | None = None,
                  cycles: int = 1, steps_per_cycle: int = 400) -> TurnMetrics:
    geom = geom or MultilegGeometry()
    traj = multileg_trajectory(A3, omega, geom, cycles, steps_per_cycle)
    return turn_metrics(traj, geom.chain)
