"""Peg-board obstacles and amplitude admittance control.

During a compliant run the two wave amplitudes ``A = (A_f, A_o)`` follow
second-order dynamics driven by the joint torques that peg contacts produce:

    M A'' + B A' + K (A - A0) = J(t) tau_ext

Pegs also push on the body through penalty springs, which enter the
quasi-static drag balance alongside the ground forces.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .chain import ChainGeometry, link_frames, material_points, point_jacobian
from .drag import FrictionModel, NonConvergence, contact_cloud, solve_cloud
from .gaits import TWO_PI, TwoWaveDesign
from .simulate import Trajectory, TurnMetrics, compose, se2_exp, turn_metrics

DEFAULT_KC = 2000.0  # N/m
DEFAULT_DAMPING = 100.0  # N s/m
DEFAULT_LOAD = 25.0  # N, robot weight carried by the ground


@dataclass(frozen=True)
class PegBoard:
    """Hexagonal lattice of round pegs; ``spacing`` is in body lengths."""

    spacing: float
    peg_radius: float = 0.0125
    origin: tuple[float, float] = (0.0, 0.0)
    body_length: float = 0.63
    extent: float = 2.0  # board half-width in body lengths

    def __post_init__(self):
        if self.spacing <= 0 or self.peg_radius <= 0:
            raise ValueError("spacing and peg_radius must be positive")
        if self.spacing * self.body_length <= 2 * self.peg_radius:
            raise ValueError("pegs overlap: spacing * BL must exceed 2 * peg_radius")

    @property
    def pitch(self) -> float:
        return self.spacing * self.body_length

    def centers(self) -> np.ndarray:
        s = self.pitch
        h = s * np.sqrt(3.0) / 2.0
        half = self.extent * self.body_length
        rows = int(np.ceil(half / h)) + 1
        cols = int(np.ceil(half / s)) + 1
        j, i = np.meshgrid(np.arange(-rows, rows + 1), np.arange(-cols, cols + 1), indexing="ij")
        x = i * s + 0.5 * s * (j % 2) + self.origin[0]
        y = j * h + self.origin[1]
        pts = np.column_stack([x.ravel(), y.ravel()])
        keep = np.all(np.abs(pts) <= half, axis=1)
        return pts[keep]


def empty_board(body_length: float = 0.63) -> PegBoard:
    """A board whose lattice is pushed entirely out of reach."""
    return PegBoard(1.0, origin=(1e6, 1e6), body_length=body_length, extent=0.0)


def random_board(spacing: float, seed: int, body_length: float = 0.63, **kw) -> PegBoard:
    """Board with its lattice origin drawn uniformly within one cell."""
    rng = np.random.default_rng(seed)
    s = spacing * body_length
    origin = (float(rng.uniform(0, s)), float(rng.uniform(0, s * np.sqrt(3.0) / 2.0)))
    return PegBoard(spacing, origin=origin, body_length=body_length, **kw)


@dataclass(frozen=True)
class AdmittanceParams:
    M: tuple[float, float] = (1.0, 1.0)
    B: tuple[float, float] = (8.0, 8.0)
    K: tuple[float, float] = (8.0, 8.0)
    A0: tuple[float, float] = (np.pi / 4, np.pi / 4)
    control_dt: float = 0.025
    k_c: float = DEFAULT_KC

    def __post_init__(self):
        for name in ("M", "B", "K"):
            if len(getattr(self, name)) != 2 or min(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be a positive diagonal pair")
        if self.control_dt <= 0:
            raise ValueError("control_dt must be positive")
        if self.k_c < 0:
            raise ValueError("k_c must be >= 0")

    @property
    def damping_ratio(self) -> np.ndarray:
        return np.asarray(self.B) / (2.0 * np.sqrt(np.asarray(self.M) * np.asarray(self.K)))


@dataclass(frozen=True)
class AdmittanceState:
    A: np.ndarray
    A_dot: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def energy(self, p: AdmittanceParams) -> float:
        e = np.asarray(self.A) - np.asarray(p.A0)
        return float(np.sum(np.asarray(p.M) * self.A_dot ** 2) + np.sum(np.asarray(p.K) * e ** 2))


@dataclass
class ContactSet:
    """Peg contacts in the body frame.

    ``local`` holds the contact point as (along, lateral) offsets from the
    center of link ``link``; ``normal`` points from the peg into the link.
    """

    link: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    point: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    normal: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    depth: np.ndarray = field(default_factory=lambda: np.zeros(0))
    local: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __len__(self):
        return len(self.depth)


def _to_body(pose, pts):
    x, y, h = pose
    c, s = np.cos(h), np.sin(h)
    d = np.asarray(pts, dtype=float) - np.array([x, y])
    return np.column_stack([c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]])


def detect_contacts(pose, shape, geom: ChainGeometry, board: PegBoard, pegs=None) -> ContactSet:
    """Disc-versus-rectangle tests between every peg and every link."""
    theta = np.asarray(shape, dtype=float)
    if pegs is None:
        pegs = board.centers()
    if len(pegs) == 0:
        return ContactSet()
    centers, headings = link_frames(theta, geom)
    q_body = _to_body(pose, pegs)  # (P, 2)
    hl = 0.5 * geom.link_length
    hw = 0.5 * geom.link_width
    r = board.peg_radius
    reach = np.hypot(hl, hw) + r
    d = q_body[:, None, :] - centers[None, :, :]  # (P, L, 2)
    near = np.hypot(d[..., 0], d[..., 1]) < reach
    if not np.any(near):
        return ContactSet()
    pi, li = np.nonzero(near)
    c, s = np.cos(headings[li]), np.sin(headings[li])
    dv = d[pi, li]
    u = c * dv[:, 0] + s * dv[:, 1]  # peg center in link coordinates
    v = -s * dv[:, 0] + c * dv[:, 1]
    cu = np.clip(u, -hl, hl)
    cv = np.clip(v, -hw, hw)
    inside = (np.abs(u) < hl) & (np.abs(v) < hw)
    gap_u = hl - np.abs(u)
    gap_v = hw - np.abs(v)
    # outside: nearest rectangle point; inside: push out through the nearest edge
    du, dvv = cu - u, cv - v
    dist = np.hypot(du, dvv)
    depth = np.where(inside, r + np.minimum(gap_u, gap_v), r - dist)
    safe = np.where(dist > 0, dist, 1.0)
    nu = np.where(inside, np.where(gap_u < gap_v, -np.sign(u), 0.0), du / safe)
    nv = np.where(inside, np.where(gap_u < gap_v, 0.0, -np.sign(v)), dvv / safe)
    # a peg center exactly on the midline picks a deterministic side
    nu = np.where(inside & (gap_u < gap_v) & (u == 0), -1.0, nu)
    nv = np.where(inside & (gap_u >= gap_v) & (v == 0), -1.0, nv)
    hit = depth > 0
    if not np.any(hit):
        return ContactSet()
    pu = np.where(inside, u, cu)[hit]
    pv = np.where(inside, v, cv)[hit]
    li, c, s = li[hit], c[hit], s[hit]
    nu, nv = nu[hit], nv[hit]
    point = centers[li] + np.column_stack([c * pu - s * pv, s * pu + c * pv])
    normal = np.column_stack([c * nu - s * nv, s * nu + c * nv])
    return ContactSet(li, point, normal, depth[hit], np.column_stack([pu, pv]))


def contact_forces(contacts: ContactSet, k_c: float) -> np.ndarray:
    """Spring forces ``(C, 2)`` on the body in the body frame."""
    return k_c * contacts.depth[:, None] * contacts.normal


def external_torques(contacts: ContactSet, k_c: float, shape, geom: ChainGeometry) -> np.ndarray:
    """Joint torques ``J^T f`` from the contact springs, with ``J`` the body-frame point Jacobian."""
    theta = np.asarray(shape, dtype=float)
    if len(contacts) == 0:
        return np.zeros(theta.size)
    jac = point_jacobian(theta, geom, contacts.link, contacts.local)  # (C, 2, N)
    f = contact_forces(contacts, k_c)
    return np.einsum("cdn,cd->n", jac, f)


def amplitude_jacobian(t, d: TwoWaveDesign, n: int) -> np.ndarray:
    """``(..., 2, N)`` map from joint torques to amplitude forces, i.e. dtheta/dA transposed."""
    i = np.arange(1, n + 1)
    tau = TWO_PI * d.omega * np.asarray(t, dtype=float)[..., None]
    return np.stack([np.sin(tau + TWO_PI * d.k_f * i / n),
                     np.sin(tau + TWO_PI * d.k_o * i / n + d.psi)], axis=-2)


def carrier_rates(t, d: TwoWaveDesign, n: int) -> np.ndarray:
    i = np.arange(1, n + 1)
    tau = TWO_PI * d.omega * np.asarray(t, dtype=float)[..., None]
    w = TWO_PI * d.omega
    return w * np.stack([np.cos(tau + TWO_PI * d.k_f * i / n),
                         np.cos(tau + TWO_PI * d.k_o * i / n + d.psi)], axis=-2)


def admittance_step(state: AdmittanceState, tau_ext, p: AdmittanceParams, t: float,
                    d: TwoWaveDesign, n: int, bounds=None) -> AdmittanceState:
    """One semi-implicit Euler step of the amplitude dynamics.

    ``bounds`` overrides the clamp interval ``[0, theta_max]``; rates of
    clamped components are zeroed.
    """
    M, B, K = (np.asarray(x, dtype=float) for x in (p.M, p.B, p.K))
    A = np.asarray(state.A, dtype=float)
    A_dot = np.asarray(state.A_dot, dtype=float)
    drive = amplitude_jacobian(t, d, n) @ np.asarray(tau_ext, dtype=float)
    acc = (drive - B * A_dot - K * (A - np.asarray(p.A0))) / M
    A_dot = A_dot + p.control_dt * acc
    A = A + p.control_dt * A_dot
    lo, hi = (0.0, d.theta_max) if bounds is None else bounds
    clamped = (A < lo) | (A > hi)
    A = np.clip(A, lo, hi)
    A_dot = np.where(clamped, 0.0, A_dot)
    return AdmittanceState(A, A_dot)


def amplitude_shape(t, A, d: TwoWaveDesign, n: int) -> np.ndarray:
    """Two-wave shape with the amplitudes given directly instead of by profiles."""
    return np.einsum("...k,...kn->...n", np.asarray(A, dtype=float), amplitude_jacobian(t, d, n))


def _contact_rows(contacts: ContactSet, theta, theta_dot, geom, k_c):
    if len(contacts) == 0:
        return np.zeros((0, 7))
    _, vel = material_points(theta, theta_dot, geom, contacts.link, contacts.local)
    f0 = k_c * contacts.depth
    return np.column_stack([contacts.point, vel, contacts.normal, f0])


@dataclass
class CompliantRun:
    trajectory: Trajectory
    metrics: TurnMetrics
    amplitudes: np.ndarray  # (K+1, 2)
    contact_counts: np.ndarray  # (K,)
    pegs: np.ndarray


def nominal_amplitudes(t, d: TwoWaveDesign) -> np.ndarray:
    """Profile amplitudes ``(..., 2)`` of the design at time ``t``."""
    tau_f = TWO_PI * d.omega * np.asarray(t, dtype=float)
    return np.stack([d.forward_profile(tau_f), d.turning_profile(tau_f + d.psi)], axis=-1)


def _clear_pegs(pegs, pose, theta, geom, board):
    # the robot is placed on the board, so no peg starts inside its body
    body = _to_body(pose, pegs)
    centers, _ = link_frames(theta, geom)
    d = body[:, None, :] - centers[None]
    gap = np.hypot(d[..., 0], d[..., 1]).min(axis=1)
    limit = np.hypot(0.5 * geom.link_length, 0.5 * geom.link_width) + board.peg_radius
    return pegs[gap >= limit]


def simulate_compliant(design: TwoWaveDesign, board: PegBoard, p: AdmittanceParams, geom: ChainGeometry,
                       model: FrictionModel, cycles: int = 3, compliant: bool = True,
                       damping: float = DEFAULT_DAMPING, load: float = DEFAULT_LOAD,
                       start=(0.0, 0.0, 0.0), clear_start: bool = True) -> CompliantRun:
    """Integrate the two-wave gait among pegs.

    The commanded amplitudes are the design's profile values plus an
    admittance deviation driven by contact torques (held at zero when
    ``compliant`` is false).  With a constant-profile design this is the
    plain admittance law around ``A0``.  Each step detects contacts at the
    current pose, feeds the spring forces into the drag balance at the
    mid-step shape and advances the pose with the exact SE(2) exponential.
    """
    n = geom.num_joints
    dt = p.control_dt
    steps = int(round(design.period / dt))
    if steps < 100 or abs(steps * dt - design.period) > 1e-9 * design.period:
        raise ValueError("control_dt must divide the gait period into at least 100 steps")
    total = steps * cycles
    t_all = np.arange(total + 1) * dt
    nominal = nominal_amplitudes(t_all, design)
    pose = np.asarray(start, dtype=float)
    pegs = board.centers()
    if clear_start and len(pegs):
        pegs = _clear_pegs(pegs, pose, amplitude_shape(0.0, nominal[0], design, n), geom, board)
    _, _, weights = contact_cloud(np.zeros(n), np.zeros(n), geom, model)
    deviation = replace(p, A0=(0.0, 0.0))
    poses = np.empty((total + 1, 3))
    shapes = np.empty((total + 1, n))
    amps = np.empty((total + 1, 2))
    xis = np.empty((total, 3))
    counts = np.zeros(total, dtype=int)
    state = AdmittanceState(np.zeros(2), np.zeros(2))
    poses[0] = pose
    amps[0] = nominal[0]
    shapes[0] = amplitude_shape(0.0, amps[0], design, n)
    xi = np.zeros(3)
    for k in range(total):
        t = t_all[k]
        theta = shapes[k]
        contacts = detect_contacts(pose, theta, geom, board, pegs)
        counts[k] = len(contacts)
        if compliant:
            tau = external_torques(contacts, p.k_c, theta, geom)
            nom = nominal[k + 1]
            lo = np.minimum(0.0, nom)
            state = admittance_step(state, tau, deviation, t, design, n,
                                    bounds=(lo - nom, design.theta_max - nom))
        amps[k + 1] = nominal[k + 1] + state.A
        theta_next = amplitude_shape(t_all[k + 1], amps[k + 1], design, n)
        theta_mid = 0.5 * (theta + theta_next)
        rate = (theta_next - theta) / dt
        if len(contacts):
            contacts = detect_contacts(pose, theta_mid, geom, board, pegs)
        pts, vel, _ = contact_cloud(theta_mid, rate, geom, model)
        # ground weights carry a unit load, so contact forces are scaled by the robot weight
        rows = _contact_rows(contacts, theta_mid, rate, geom, p.k_c / load)
        xi_b, res = solve_cloud(pts, vel, weights, model.mu, model.epsilon, geom.body_length,
                                contacts=rows, contact_damping=damping / load, xi0=xi)
        if not res <= 1e-6:
            raise NonConvergence(f"step {k}: balance residual {float(res):.3g}", residual=float(res), index=k)
        xi = xi_b
        xis[k] = xi
        pose = compose(pose, se2_exp(xi, dt))
        poses[k + 1] = pose
        shapes[k + 1] = theta_next
    traj = Trajectory(t_all, poses, shapes, steps, xis)
    return CompliantRun(traj, turn_metrics(traj, geom), amps, counts, pegs)


def peg_study(design: TwoWaveDesign, spacings, trials: int, p: AdmittanceParams, geom: ChainGeometry,
              model: FrictionModel, cycles: int = 2, seed: int = 0, peg_radius: float = 0.0125,
              **kw) -> list[dict]:
    """Compliant and open-loop runs over randomized boards; one row per run."""
    rows = []
    for si, spacing in enumerate(spacings):
        for trial in range(trials):
            board = random_board(spacing, seed * 1000003 + si * 1009 + trial, geom.body_length,
                                 peg_radius=peg_radius)
            for mode in ("compliant", "open_loop"):
                run = simulate_compliant(design, board, p, geom, model, cycles, compliant=mode == "compliant", **kw)
                rows.append({"spacing": float(spacing), "trial": trial, "mode": mode,
                             "origin_x": board.origin[0], "origin_y": board.origin[1],
                             **run.metrics.as_dict(),
                             "mean_contacts": float(run.contact_counts.mean())})
    return rows


def summarize_study(rows) -> list[dict]:
    out = []
    for spacing in sorted({r["spacing"] for r in rows}):
        entry = {"spacing": spacing}
        for mode in ("compliant", "open_loop"):
            vals = np.array([r["angular_displacement"] for r in rows if r["spacing"] == spacing and r["mode"] == mode])
            entry[f"{mode}_mean"] = float(vals.mean())
            entry[f"{mode}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        entry["ratio"] = entry["compliant_mean"] / entry["open_loop_mean"] if entry["open_loop_mean"] else float("nan")
        out.append(entry)
    return out
