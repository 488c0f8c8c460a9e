"""Shape-space grids, reduced connections, height functions and their integrals.

A two-dimensional sub-shape space is described by an *embedding*: a function
mapping coordinate arrays ``(c1, c2)`` to joint angles ``(..., N)`` together
with the Jacobian ``d theta / d(c1, c2)`` of shape ``(..., N, 2)``.  The
reduced connection at a cell is the full local connection of the embedded
shape composed with that Jacobian, and the height function is the curl of
one of its rows.

Surface integrals use signed winding numbers.  On periodic axes a gait path
need not close in the plane (it may wrap around the cylinder or torus); such
a path is closed with the straight reference loop through the origin in the
same homology class, so the surface integral measures the line integral of
the path minus that of the reference loop.  On the ``(tau, A)`` cylinders
the reference is the ``A = 0`` line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .chain import ChainGeometry, FeasibilitySpec, feasible_batch
from .drag import FrictionModel, connection_batch
from .gaits import TWO_PI, TwoWaveDesign

ROWS = {"forward": 0, "lateral": 1, "rotational": 2}


class InfeasiblePath(ValueError):
    """A gait path sample lies outside the feasible region."""


@dataclass(frozen=True)
class Axis:
    name: str
    lower: float
    upper: float
    cells: int
    periodic: bool = False

    def __post_init__(self):
        if self.cells < 8:
            raise ValueError("an axis needs at least 8 cells")
        if self.periodic and (self.lower != 0.0 or not np.isclose(self.upper, TWO_PI)):
            raise ValueError("periodic axes span [0, 2*pi)")
        if self.upper <= self.lower:
            raise ValueError("axis bounds are empty")

    @property
    def values(self) -> np.ndarray:
        if self.periodic:
            return np.arange(self.cells) * (TWO_PI / self.cells)
        return np.linspace(self.lower, self.upper, self.cells)

    @property
    def step(self) -> float:
        if self.periodic:
            return TWO_PI / self.cells
        return (self.upper - self.lower) / (self.cells - 1)


def periodic_axis(name: str, cells: int = 129) -> Axis:
    return Axis(name, 0.0, TWO_PI, cells, periodic=True)


@dataclass(frozen=True)
class ShapeGrid:
    first: Axis
    second: Axis

    @property
    def shape(self):
        return (self.first.cells, self.second.cells)

    def mesh(self):
        return np.meshgrid(self.first.values, self.second.values, indexing="ij")

    @property
    def cell_area(self) -> float:
        return self.first.step * self.second.step

    def swapped(self) -> "ShapeGrid":
        return ShapeGrid(self.second, self.first)


Embedding = Callable[[np.ndarray, np.ndarray], tuple]


@dataclass
class ConnectionField:
    """Reduced connection ``(n1, n2, 3, 2)`` and feasibility mask ``(n1, n2)``.

    Infeasible cells hold NaN.
    """

    grid: ShapeGrid
    values: np.ndarray
    feasible: np.ndarray

    def swapped(self) -> "ConnectionField":
        return ConnectionField(self.grid.swapped(), np.swapaxes(self.values, 0, 1)[..., ::-1].copy(),
                               self.feasible.T.copy())


@dataclass
class HeightField:
    grid: ShapeGrid
    values: np.ndarray
    feasible: np.ndarray
    row: str = "rotational"


@dataclass
class GaitPath:
    """Closed curve sampled at ``P`` points ``(P, 2)``; the last sample closes onto the first.

    Samples are stored unwrapped (lifted to the plane) so that a path that
    wraps around a periodic axis ends a multiple of ``2*pi`` from its start.
    """

    points: np.ndarray
    periodic: tuple = (False, False)
    closure_tol: float = 1e-9
    _shift: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("path points must be (P, 2)")
        gap = self.points[-1] - self.points[0]
        shift = np.zeros(2)
        for k in range(2):
            if self.periodic[k]:
                shift[k] = TWO_PI * np.round(gap[k] / TWO_PI)
        if np.any(np.abs(gap - shift) > self.closure_tol):
            raise ValueError("gait path is not closed")
        self._shift = shift

    @property
    def lattice_shift(self) -> np.ndarray:
        """Translation between the lifted end and start (zero for contractible paths)."""
        return self._shift

    def reversed(self) -> "GaitPath":
        return GaitPath(self.points[::-1].copy(), self.periodic, self.closure_tol)


def build_feasibility_mask(grid: ShapeGrid, embed: Embedding, spec: FeasibilitySpec,
                           geom: ChainGeometry) -> np.ndarray:
    c1, c2 = grid.mesh()
    theta, _ = embed(c1, c2)
    return feasible_batch(theta, spec, geom)


def reduced_connection(grid: ShapeGrid, embed: Embedding, model: FrictionModel, geom: ChainGeometry,
                       feasible: np.ndarray | None = None) -> ConnectionField:
    c1, c2 = grid.mesh()
    theta, jac = embed(c1, c2)
    if feasible is None:
        feasible = np.ones(grid.shape, dtype=bool)
    values = np.full(grid.shape + (3, 2), np.nan)
    idx = np.nonzero(feasible)
    if idx[0].size:
        conn = connection_batch(theta[idx], model, geom)  # (K, 3, N)
        values[idx] = conn @ jac[idx]
    return ConnectionField(grid, values, feasible.copy())


def _derivative(f, mask, step, axis, periodic):
    """Central difference along ``axis``, one-sided next to masked cells."""
    n = f.shape[axis]
    if periodic:
        fp = np.roll(f, -1, axis)
        fm = np.roll(f, 1, axis)
        mp = np.roll(mask, -1, axis)
        mm = np.roll(mask, 1, axis)
    else:
        pad = [(0, 0)] * f.ndim
        pad[axis] = (1, 1)
        fpad = np.pad(f, pad, constant_values=np.nan)
        mpad = np.pad(mask, pad, constant_values=False)
        sl = [slice(None)] * f.ndim
        sl[axis] = slice(2, n + 2)
        fp, mp = fpad[tuple(sl)], mpad[tuple(sl)]
        sl[axis] = slice(0, n)
        fm, mm = fpad[tuple(sl)], mpad[tuple(sl)]
    out = np.full(f.shape, np.nan)
    both = mask & mp & mm
    out[both] = (fp[both] - fm[both]) / (2 * step)
    fwd = mask & mp & ~mm
    out[fwd] = (fp[fwd] - f[fwd]) / step
    bwd = mask & ~mp & mm
    out[bwd] = (f[bwd] - fm[bwd]) / step
    return out


def curl(f1, f2, grid: ShapeGrid, mask):
    """Scalar curl ``d f2/d c1 - d f1/d c2`` of a planar vector field on ``grid``."""
    d2 = _derivative(f2, mask, grid.first.step, 0, grid.first.periodic)
    d1 = _derivative(f1, mask, grid.second.step, 1, grid.second.periodic)
    return d2 - d1


def height_function(conn: ConnectionField, row: str = "rotational") -> HeightField:
    r = ROWS[row]
    f1 = conn.values[..., r, 0]
    f2 = conn.values[..., r, 1]
    values = curl(f1, f2, conn.grid, conn.feasible)
    return HeightField(conn.grid, values, np.isfinite(values), row)


def line_integral(path: GaitPath, connection: Callable, feasible: Callable | None = None) -> np.ndarray:
    """Trapezoidal integral of ``A(r) dr`` around the path.

    ``connection`` maps ``(P, 2)`` coordinates to ``(P, 3, 2)`` matrices;
    ``feasible`` (optional) maps coordinates to booleans.
    """
    pts = path.points
    if feasible is not None and not np.all(feasible(pts)):
        raise InfeasiblePath("gait path crosses an infeasible region")
    a = connection(pts)
    dr = np.diff(pts, axis=0)
    mid = 0.5 * (a[:-1] + a[1:])
    return np.einsum("kij,kj->i", mid, dr)


@njit(cache=True)
def _winding_kernel(ax, ay, bx, by, qx, qy, tol):
    out = np.empty(qx.shape[0])
    for k in range(qx.shape[0]):
        total = 0.0
        for e in range(ax.shape[0]):
            dax = ax[e] - qx[k]
            day = ay[e] - qy[k]
            dbx = bx[e] - qx[k]
            dby = by[e] - qy[k]
            cross = dax * dby - day * dbx
            dot = dax * dbx + day * dby
            if abs(cross) <= tol and dot <= 0.0:
                continue  # query on this edge: contributes half a turn via its neighbours
            total += np.arctan2(cross, dot)
        out[k] = total / (2.0 * np.pi)
    return out


def winding_numbers(loop, queries) -> np.ndarray:
    """Signed winding number of a closed polygon ``loop (P, 2)`` about each query point.

    Points lying on the polygon get half-integer values, which is the
    trapezoid weight for cells centred on the boundary.
    """
    loop = np.asarray(loop, dtype=float)
    if np.allclose(loop[0], loop[-1]):
        loop = loop[:-1]
    b = np.roll(loop, -1, axis=0)
    queries = np.asarray(queries, dtype=float).reshape(-1, 2)
    scale = max(float(np.ptp(loop, axis=0).max()), 1e-12)
    w = _winding_kernel(np.ascontiguousarray(loop[:, 0]), np.ascontiguousarray(loop[:, 1]),
                        np.ascontiguousarray(b[:, 0]), np.ascontiguousarray(b[:, 1]),
                        np.ascontiguousarray(queries[:, 0]), np.ascontiguousarray(queries[:, 1]),
                        1e-12 * scale * scale)
    return np.round(2.0 * w) / 2.0


def closed_loop(path: GaitPath) -> np.ndarray:
    """Close a lifted path with the reference loop through the origin."""
    pts = path.points
    shift = path.lattice_shift
    if not np.any(shift):
        return pts
    # end -> shift, reference back to origin, origin -> start
    return np.vstack([pts, shift[None], np.zeros((1, 2)), pts[:1]])


def surface_integral(hf: HeightField, path: GaitPath) -> float:
    """Sum of height x cell area x winding number over feasible cells."""
    loop = closed_loop(path)
    grid = hf.grid
    c1, c2 = grid.mesh()
    centers = np.stack([c1, c2], axis=-1)[hf.feasible]
    vals = hf.values[hf.feasible]
    lo = loop.min(axis=0)
    hi = loop.max(axis=0)
    ranges = []
    for k, ax in enumerate((grid.first, grid.second)):
        if ax.periodic:
            ranges.append(np.arange(np.floor((lo[k] - TWO_PI) / TWO_PI), np.ceil(hi[k] / TWO_PI) + 1))
        else:
            ranges.append(np.zeros(1))
    total = 0.0
    for m1 in ranges[0]:
        for m2 in ranges[1]:
            q = centers + TWO_PI * np.array([m1, m2])
            inside = np.all((q >= lo - grid.first.step) & (q <= hi + grid.second.step), axis=1)
            if not np.any(inside):
                continue
            w = winding_numbers(loop, q[inside])
            total += float(np.sum(vals[inside] * w))
    return total * grid.cell_area


# ---------------------------------------------------------------------------
# embeddings of the two-wave gait's sub-shape spaces

def _waves(n, k):
    return TWO_PI * k * np.arange(1, n + 1) / n


def geometric_embedding(k: float, n: int) -> Embedding:
    """``(r1, r2)`` sine/cosine basis space; the Jacobian is constant."""
    s = np.sin(_waves(n, k))
    c = np.cos(_waves(n, k))

    def embed(r1, r2):
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        theta = r1[..., None] * s + r2[..., None] * c
        jac = np.broadcast_to(np.stack([s, c], axis=-1), theta.shape + (2,))
        return theta, jac

    return embed


def turning_embedding(d: TwoWaveDesign, n: int) -> Embedding:
    """``(tau_o, A_o)`` space with the forward profile and phase lag held fixed."""
    sf, so = _waves(n, d.k_f), _waves(n, d.k_o)

    def embed(tau_o, a_o):
        tau_o = np.asarray(tau_o, dtype=float)[..., None]
        a_o = np.asarray(a_o, dtype=float)[..., None]
        tau_f = tau_o - d.psi
        a_f = d.forward_profile(tau_f)
        da_f = d.forward_profile.derivative(tau_f)
        theta = a_f * np.sin(tau_f + sf) + a_o * np.sin(tau_o + so)
        d_tau = da_f * np.sin(tau_f + sf) + a_f * np.cos(tau_f + sf) + a_o * np.cos(tau_o + so)
        d_amp = np.broadcast_to(np.sin(tau_o + so), theta.shape)
        return theta, np.stack([d_tau, d_amp], axis=-1)

    return embed


def forward_embedding(d: TwoWaveDesign, n: int) -> Embedding:
    """``(tau_f, A_f)`` space with the turning profile and phase lag held fixed."""
    sf, so = _waves(n, d.k_f), _waves(n, d.k_o)

    def embed(tau_f, a_f):
        tau_f = np.asarray(tau_f, dtype=float)[..., None]
        a_f = np.asarray(a_f, dtype=float)[..., None]
        tau_o = tau_f + d.psi
        a_o = d.turning_profile(tau_o)
        da_o = d.turning_profile.derivative(tau_o)
        theta = a_f * np.sin(tau_f + sf) + a_o * np.sin(tau_o + so)
        d_tau = a_f * np.cos(tau_f + sf) + da_o * np.sin(tau_o + so) + a_o * np.cos(tau_o + so)
        d_amp = np.broadcast_to(np.sin(tau_f + sf), theta.shape)
        return theta, np.stack([d_tau, d_amp], axis=-1)

    return embed


def phase_embedding(d: TwoWaveDesign, n: int) -> Embedding:
    """``(tau_f, tau_o)`` torus with both amplitude profiles held fixed."""
    sf, so = _waves(n, d.k_f), _waves(n, d.k_o)

    def embed(tau_f, tau_o):
        tau_f = np.asarray(tau_f, dtype=float)[..., None]
        tau_o = np.asarray(tau_o, dtype=float)[..., None]
        a_f = d.forward_profile(tau_f)
        a_o = d.turning_profile(tau_o)
        theta = a_f * np.sin(tau_f + sf) + a_o * np.sin(tau_o + so)
        d_f = d.forward_profile.derivative(tau_f) * np.sin(tau_f + sf) + a_f * np.cos(tau_f + sf)
        d_o = d.turning_profile.derivative(tau_o) * np.sin(tau_o + so) + a_o * np.cos(tau_o + so)
        return theta, np.stack([d_f, d_o], axis=-1)

    return embed


def gait_paths(d: TwoWaveDesign, samples: int = 200) -> dict:
    """The design's path in each of the three sub-shape spaces, over one cycle."""
    tau = np.linspace(0.0, TWO_PI, samples + 1)
    turning = np.column_stack([tau + d.psi, d.turning_profile(tau + d.psi)])
    forward = np.column_stack([tau, d.forward_profile(tau)])
    phase = np.column_stack([tau, tau + d.psi])
    return {
        "turning": GaitPath(turning, (True, False)),
        "forward": GaitPath(forward, (True, False)),
        "phase": GaitPath(phase, (True, True)),
    }


def embedding_connection(embed: Embedding, model: FrictionModel, geom: ChainGeometry):
    """Connection provider for :func:`line_integral` computed directly from an embedding."""

    def provider(pts):
        theta, jac = embed(pts[:, 0], pts[:, 1])
        return connection_batch(theta, model, geom) @ jac

    return provider


def interpolated_connection(conn: ConnectionField):
    """Bilinear interpolation of a connection field; periodic axes wrap."""
    from scipy.interpolate import RegularGridInterpolator

    axes, vals = [], conn.values
    for k, ax in enumerate((conn.grid.first, conn.grid.second)):
        v = ax.values
        if ax.periodic:
            v = np.append(v, TWO_PI)
            vals = np.concatenate([vals, np.take(vals, [0], axis=k)], axis=k)
        axes.append(v)
    interp = RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=np.nan)

    def provider(pts):
        q = np.array(pts, dtype=float)
        for k, ax in enumerate((conn.grid.first, conn.grid.second)):
            if ax.periodic:
                q[:, k] = np.mod(q[:, k], TWO_PI)
        return interp(q)

    return provider
