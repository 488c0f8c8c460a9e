"""Hierarchical coordinate ascent over the three gait-design functions.

The two-wave design is split into three low-dimensional pieces: the turning
amplitude profile (``a_o``, ``phi_o``), the forward amplitude profile
(``a_f``, ``gamma``, ``phi_f``) and the phase lag ``psi``.  Each inner step
holds two pieces fixed, scores a grid of candidates for the third by the
surface integral of the rotational height function on the matching
two-dimensional sub-shape space, and simulates the best-scoring feasible
candidates.  A candidate replaces the incumbent only when the simulated
turning angle improves, so the objective trace never decreases.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainGeometry, FeasibilitySpec
from .drag import FrictionModel, NonConvergence
from .gaits import TWO_PI, TwoWaveDesign, design_to_dict
from .geomech import (Axis, GaitPath, ShapeGrid, build_feasibility_mask, forward_embedding, height_function,
                      periodic_axis, phase_embedding, reduced_connection, surface_integral, turning_embedding)
from .simulate import angular_displacement, feasibility_certificate, integrate_gait

PHASE_PARAMS = ("phi_f", "phi_o", "psi")


class NoFeasibleStart(RuntimeError):
    """No sampled candidate design satisfies the feasibility constraints."""


@dataclass(frozen=True)
class OptimizerConfig:
    bounds: dict = field(default_factory=lambda: {
        "a_f": (0.0, np.pi / 2), "gamma": (0.0, 2.0), "phi_f": (0.0, TWO_PI),
        "a_o": (0.0, np.pi / 2), "phi_o": (0.0, TWO_PI), "psi": (0.0, TWO_PI),
    })
    grid_values: int = 9
    phase_samples: int = 200
    steps_per_cycle: int = 100
    tol: float = 0.05  # degrees
    max_outer: int = 6
    top_k: int = 3
    refine_levels: int = 3
    tau_cells: int = 48
    amp_cells: int = 33
    collision_margin: float = 0.0
    starts: int = 0  # extra quasi-random starting designs
    seed: int = 0

    def __post_init__(self):
        for k, (lo, hi) in self.bounds.items():
            if not hi > lo:
                raise ValueError(f"empty bounds for {k}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.grid_values < 3:
            raise ValueError("grid_values must be >= 3")


@dataclass
class OptimizationReport:
    best: TwoWaveDesign
    objective: float
    trace: list
    certificate: dict
    evaluations: int
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best_design": design_to_dict(self.best),
            "objective_deg": self.objective,
            "trace": list(self.trace),
            "certificate": self.certificate,
            "evaluations": self.evaluations,
            "history": self.history,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def is_design_feasible(design: TwoWaveDesign, geom: ChainGeometry, samples: int = 200,
                       collision_margin: float = 0.0) -> bool:
    return feasibility_certificate(design, geom, samples, collision_margin)["feasible"]


def objective(design: TwoWaveDesign, geom: ChainGeometry, model: FrictionModel,
              spec: FeasibilitySpec | None = None, steps_per_cycle: int = 100, samples: int = 200) -> float:
    """Signed turning angle per cycle in degrees, or ``-inf`` for an infeasible design.

    ``spec`` overrides the design's joint limit and sets the collision margin.
    """
    if spec is not None:
        design = design.with_params(theta_max=spec.theta_max)
    margin = spec.collision_margin if spec is not None else 0.0
    if not is_design_feasible(design, geom, samples, margin):
        return float("-inf")
    try:
        return angular_displacement(integrate_gait(design, geom, model, steps_per_cycle, 1))
    except NonConvergence:
        return float("-inf")


def _grid(lo, hi, m, periodic):
    if periodic:
        return lo + (hi - lo) * np.arange(m) / m
    return np.linspace(lo, hi, m)


def _refined(center, lo, hi, m, periodic, coarse):
    half = coarse
    vals = np.linspace(center - half, center + half, m)
    if periodic:
        return np.mod(vals, TWO_PI)
    return np.unique(np.clip(vals, lo, hi))


class _Search:
    def __init__(self, geom, model, cfg: OptimizerConfig):
        self.geom = geom
        self.model = model
        self.cfg = cfg
        self.evaluations = 0
        self.cache = {}

    def key(self, d):
        return tuple(np.round([d.params()[k] for k in ("a_f", "gamma", "phi_f", "a_o", "phi_o", "psi")], 12))

    def feasible(self, d):
        return is_design_feasible(d, self.geom, self.cfg.phase_samples, self.cfg.collision_margin)

    def value(self, d):
        k = self.key(d)
        if k not in self.cache:
            self.evaluations += 1
            spec = FeasibilitySpec(d.theta_max, self.cfg.collision_margin)
            self.cache[k] = objective(d, self.geom, self.model, spec, self.cfg.steps_per_cycle,
                                      self.cfg.phase_samples)
        return self.cache[k]

    # sub-shape spaces -----------------------------------------------------

    def _height(self, grid, embed, d):
        spec = FeasibilitySpec(d.theta_max, self.cfg.collision_margin)
        mask = build_feasibility_mask(grid, embed, spec, self.geom)
        conn = reduced_connection(grid, embed, self.model, self.geom, mask)
        return height_function(conn, "rotational")

    def turning_field(self, d):
        amax = 2.0 * d.theta_max
        grid = ShapeGrid(periodic_axis("tau_o", self.cfg.tau_cells), Axis("A_o", 0.0, amax, self.cfg.amp_cells))
        return self._height(grid, turning_embedding(d, self.geom.num_joints), d)

    def forward_field(self, d):
        amax = 2.0 * d.theta_max
        grid = ShapeGrid(periodic_axis("tau_f", self.cfg.tau_cells), Axis("A_f", -amax, amax, self.cfg.amp_cells))
        return self._height(grid, forward_embedding(d, self.geom.num_joints), d)

    def phase_field(self, d):
        grid = ShapeGrid(periodic_axis("tau_f", self.cfg.tau_cells), periodic_axis("tau_o", self.cfg.tau_cells))
        return self._height(grid, phase_embedding(d, self.geom.num_joints), d)


def _path(space, d, samples=96):
    tau = np.linspace(0.0, TWO_PI, samples + 1)
    if space == "turning":
        return GaitPath(np.column_stack([tau + d.psi, d.turning_profile(tau + d.psi)]), (True, False))
    if space == "forward":
        return GaitPath(np.column_stack([tau, d.forward_profile(tau)]), (True, False))
    return GaitPath(np.column_stack([tau, tau + d.psi]), (True, True))


BLOCKS = (
    ("turning", ("a_o", "phi_o")),
    ("forward", ("a_f", "gamma", "phi_f")),
    ("phase", ("psi",)),
)


def _inner(search: _Search, incumbent: TwoWaveDesign, best: float, space: str, names, axes, hf):
    """Score the candidate grid, simulate the top feasible ones, return (design, value)."""
    cfg = search.cfg
    scored = []
    for combo in itertools.product(*axes):
        cand = incumbent.with_params(**dict(zip(names, (float(v) for v in combo))))
        try:
            s = surface_integral(hf, _path(space, cand))
        except ValueError:
            continue
        scored.append((-s, tuple(float(v) for v in combo), cand))
    scored.sort(key=lambda r: (r[0], r[1]))
    tried = 0
    out, out_val = incumbent, best
    for _, _, cand in scored:
        if tried >= cfg.top_k:
            break
        if not search.feasible(cand):
            continue
        tried += 1
        v = search.value(cand)
        if v > out_val:
            out, out_val = cand, v
    return out, out_val


def _block_step(search, incumbent, best, space, names):
    """Coarse grid over the block, then grids shrunk around the incumbent."""
    cfg = search.cfg
    m = cfg.grid_values
    periodic = [n in PHASE_PARAMS for n in names]
    axes = [_grid(*cfg.bounds[n], m, p) for n, p in zip(names, periodic)]
    # the height field depends only on the two blocks held fixed
    hf = {"turning": search.turning_field, "forward": search.forward_field,
          "phase": search.phase_field}[space](incumbent)
    hf.values = np.where(hf.feasible, hf.values, 0.0)
    d, v = _inner(search, incumbent, best, space, names, axes, hf)
    radius = [(cfg.bounds[n][1] - cfg.bounds[n][0]) / (m if per else m - 1) for n, per in zip(names, periodic)]
    for _ in range(cfg.refine_levels):
        p = d.params()
        axes = [_refined(p[n], *cfg.bounds[n], m, per, r) for n, per, r in zip(names, periodic, radius)]
        d, v = _inner(search, d, v, space, names, axes, hf)
        radius = [r / ((m - 1) / 2) for r in radius]
    return d, v


def _starts(initial: TwoWaveDesign, cfg: OptimizerConfig):
    out = [initial]
    if cfg.starts > 0:
        from scipy.stats import qmc

        names = ("a_f", "gamma", "phi_f", "a_o", "phi_o", "psi")
        pts = qmc.Sobol(len(names), scramble=True, seed=cfg.seed).random(cfg.starts)
        lo = np.array([cfg.bounds[n][0] for n in names])
        hi = np.array([cfg.bounds[n][1] for n in names])
        for row in lo + pts * (hi - lo):
            out.append(initial.with_params(**dict(zip(names, (float(x) for x in row)))))
    return out


def optimize(initial: TwoWaveDesign, cfg: OptimizerConfig | None = None, geom: ChainGeometry | None = None,
             model: FrictionModel | None = None) -> OptimizationReport:
    """Coordinate ascent from ``initial`` (and optional extra starts); returns the best feasible design."""
    cfg = cfg or OptimizerConfig()
    geom = geom or ChainGeometry()
    model = model or FrictionModel()
    search = _Search(geom, model, cfg)
    starts = [(search.value(d), i, d) for i, d in enumerate(_starts(initial, cfg))]
    feasible = [s for s in starts if np.isfinite(s[0])]
    if not feasible:
        # fall back on the first coarse-grid turning profile that is feasible
        names = ("a_o", "phi_o")
        axes = [_grid(*cfg.bounds[n], cfg.grid_values, n in PHASE_PARAMS) for n in names]
        for combo in itertools.product(*axes):
            cand = initial.with_params(**dict(zip(names, (float(c) for c in combo))))
            if search.feasible(cand):
                feasible = [(search.value(cand), 0, cand)]
                break
    if not feasible:
        raise NoFeasibleStart("no feasible starting design found")
    results = []
    for v0, idx, d0 in sorted(feasible, key=lambda s: s[1]):
        d, v = d0, v0
        trace = [v]
        history = [{"outer": 0, "block": "start", "objective": v, "params": _rounded(d)}]
        for outer in range(1, cfg.max_outer + 1):
            start_val = v
            for space, names in BLOCKS:
                d, v = _block_step(search, d, v, space, names)
                history.append({"outer": outer, "block": space, "objective": v, "params": _rounded(d)})
            trace.append(v)
            if v - start_val < cfg.tol:
                break
        results.append((v, idx, d, trace, history))
    results.sort(key=lambda r: (-r[0], r[1]))
    v, _, d, trace, history = results[0]
    cert = feasibility_certificate(d, geom, cfg.phase_samples, cfg.collision_margin)
    return OptimizationReport(d, float(v), [float(x) for x in trace], cert, search.evaluations, history)


def _rounded(d: TwoWaveDesign) -> dict:
    return {k: round(float(v), 10) for k, v in d.params().items()}
