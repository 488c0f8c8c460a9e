"""World-frame integration of gaits and turning metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import ChainGeometry, link_corners, self_collides_batch
from .drag import FrictionModel, NonConvergence, solve_batch
from .gaits import TwoWaveDesign, two_wave_rate, two_wave_shape

DEFAULT_STEPS = 400
DEFAULT_CYCLES = 3


@dataclass
class Trajectory:
    """Sampled world poses ``(x, y, heading)`` and joint shapes.

    ``heading`` is unwrapped.  ``steps_per_cycle`` records the sampling so
    per-cycle statistics can slice the arrays.
    """

    t: np.ndarray
    poses: np.ndarray
    shapes: np.ndarray
    steps_per_cycle: int
    body_velocity: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    @property
    def num_cycles(self) -> int:
        return (len(self.t) - 1) // self.steps_per_cycle

    def to_dict(self) -> dict:
        return {
            "steps_per_cycle": int(self.steps_per_cycle),
            "t": self.t.tolist(),
            "x": self.poses[:, 0].tolist(),
            "y": self.poses[:, 1].tolist(),
            "heading": self.poses[:, 2].tolist(),
            "shapes": self.shapes.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        poses = np.column_stack([data["x"], data["y"], data["heading"]])
        return cls(np.asarray(data["t"], dtype=float), poses,
                   np.asarray(data["shapes"], dtype=float), int(data["steps_per_cycle"]))


@dataclass(frozen=True)
class TurnMetrics:
    angular_displacement: float  # degrees per cycle
    swept_area: float  # BL^2
    translation_drift: float  # BL per cycle

    def as_dict(self) -> dict:
        return {"angular_displacement": self.angular_displacement,
                "swept_area": self.swept_area,
                "translation_drift": self.translation_drift}


def se2_exp(xi, dt):
    """Body-frame displacement ``(dx, dy, dtheta)`` of the twist ``xi`` held for ``dt``."""
    vx, vy, w = (np.asarray(xi, dtype=float)[..., k] * dt for k in range(3))
    small = np.abs(w) < 1e-8
    ws = np.where(small, 1.0, w)
    a = np.where(small, 1.0 - w * w / 6.0, np.sin(ws) / ws)
    b = np.where(small, w / 2.0 - w ** 3 / 24.0, (1.0 - np.cos(ws)) / ws)
    return np.stack([a * vx - b * vy, b * vx + a * vy, w], axis=-1)


def compose(pose, delta):
    """Right-compose a body-frame displacement onto a world pose."""
    x, y, h = pose
    c, s = np.cos(h), np.sin(h)
    return np.array([x + c * delta[0] - s * delta[1], y + s * delta[0] + c * delta[1], h + delta[2]])


def integrate_twists(xis, dt, start=(0.0, 0.0, 0.0)):
    poses = np.empty((len(xis) + 1, 3))
    poses[0] = start
    deltas = se2_exp(xis, dt)
    for k, d in enumerate(deltas):
        poses[k + 1] = compose(poses[k], d)
    return poses


def integrate_gait(design: TwoWaveDesign, geom: ChainGeometry, model: FrictionModel,
                   steps_per_cycle: int = DEFAULT_STEPS, cycles: int = DEFAULT_CYCLES,
                   start=(0.0, 0.0, 0.0)) -> Trajectory:
    """Integrate the body velocity over ``cycles`` gait periods.

    Each step uses the exact SE(2) exponential of the body velocity solved at
    the step midpoint.  Because the quasi-static velocity depends only on
    the shape and its rate, one cycle of velocities is solved as a batch and
    reused for the following cycles.
    """
    if steps_per_cycle < 100:
        raise ValueError("steps_per_cycle must be >= 100")
    n = geom.num_joints
    period = design.period
    dt = period / steps_per_cycle
    t_mid = (np.arange(steps_per_cycle) + 0.5) * dt
    try:
        xi_cycle = solve_batch(two_wave_shape(t_mid, design, n), two_wave_rate(t_mid, design, n), model, geom)
    except NonConvergence as exc:
        raise NonConvergence(f"step {exc.index}: {exc}", residual=exc.residual, index=exc.index) from exc
    xis = np.tile(xi_cycle, (cycles, 1))
    t = np.arange(steps_per_cycle * cycles + 1) * dt
    poses = integrate_twists(xis, dt, start)
    shapes = two_wave_shape(t, design, n)
    return Trajectory(t, poses, shapes, steps_per_cycle, xis)


def angular_displacement(traj: Trajectory) -> float:
    """Mean heading change per full cycle, in degrees."""
    cycles = traj.num_cycles
    if cycles < 1:
        raise ValueError("trajectory spans less than one cycle")
    end = cycles * traj.steps_per_cycle
    return float(np.degrees(traj.poses[end, 2] - traj.poses[0, 2]) / cycles)


def world_points(poses, local):
    """Map body-frame points ``(K, ..., 2)`` through world poses ``(K, 3)``."""
    c = np.cos(poses[:, 2])
    s = np.sin(poses[:, 2])
    extra = (None,) * (local.ndim - 2)
    cx, sx = c[(slice(None),) + extra], s[(slice(None),) + extra]
    x = poses[:, 0][(slice(None),) + extra] + cx * local[..., 0] - sx * local[..., 1]
    y = poses[:, 1][(slice(None),) + extra] + sx * local[..., 0] + cx * local[..., 1]
    return np.stack([x, y], axis=-1)


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, counter-clockwise without repeated endpoint."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(poly) -> float:
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def swept_area(traj: Trajectory, geom: ChainGeometry) -> float:
    """Convex-hull area of all link corners over a cycle, in BL^2, averaged over cycles."""
    corners = link_corners(traj.shapes, geom)  # (K, L, 4, 2)
    world = world_points(traj.poses, corners.reshape(len(traj.t), -1, 2))
    spc = traj.steps_per_cycle
    cycles = max(traj.num_cycles, 1)
    areas = []
    for c in range(cycles):
        chunk = world[c * spc: min((c + 1) * spc + 1, len(world))]
        areas.append(polygon_area(convex_hull(chunk)))
    return float(np.mean(areas)) / geom.body_length ** 2


def translation_drift(traj: Trajectory, geom: ChainGeometry) -> float:
    cycles = max(traj.num_cycles, 1)
    end = cycles * traj.steps_per_cycle if traj.num_cycles else len(traj.t) - 1
    d = np.hypot(*(traj.poses[end, :2] - traj.poses[0, :2]))
    return float(d / cycles / geom.body_length)


def turn_metrics(traj: Trajectory, geom: ChainGeometry) -> TurnMetrics:
    return TurnMetrics(angular_displacement(traj), swept_area(traj, geom), translation_drift(traj, geom))


def feasibility_certificate(design: TwoWaveDesign, geom: ChainGeometry, samples: int = 200,
                            collision_margin: float = 0.0) -> dict:
    """Max joint angle and collision status over ``samples`` phases of one cycle."""
    t = np.arange(samples) * design.period / samples
    shapes = two_wave_shape(t, design, geom.num_joints)
    within = bool(np.all(np.abs(shapes) <= design.theta_max))
    collides = self_collides_batch(shapes, geom, collision_margin)
    return {
        "max_abs_theta_deg": float(np.degrees(np.abs(shapes).max())),
        "within_limit": within,
        "collision_free": not bool(np.any(collides)),
        "feasible": within and not bool(np.any(collides)),
    }


def sweep(designs, geom: ChainGeometry, model: FrictionModel, steps_per_cycle: int = DEFAULT_STEPS,
          cycles: int = DEFAULT_CYCLES, samples: int = 200) -> list[dict]:
    """Simulate each design; failures are recorded per row instead of aborting."""
    if not designs:
        raise ValueError("sweep needs at least one design")
    rows = []
    for idx, d in enumerate(designs):
        row = {"index": idx, **{k: float(v) for k, v in d.params().items()}}
        try:
            cert = feasibility_certificate(d, geom, samples)
            traj = integrate_gait(d, geom, model, steps_per_cycle, cycles)
            row.update(turn_metrics(traj, geom).as_dict())
            row.update(feasible=cert["feasible"], max_abs_theta_deg=cert["max_abs_theta_deg"], error="")
        except (NonConvergence, ValueError) as exc:
            row.update(angular_displacement=float("nan"), swept_area=float("nan"),
                       translation_drift=float("nan"), feasible=False,
                       max_abs_theta_deg=float("nan"), error=str(exc))
        rows.append(row)
    return rows
