"""Staggered-grid geometry, boundary masks, and the discrete divergence/gradient pair.

Layout conventions used throughout the package:

* cells are indexed ``(i, j)`` with ``i`` the x index and ``j`` the y index,
  so arrays have shape ``(m, n)`` and axis 0 runs along x;
* x flux components live on the ``(m + 1, n)`` vertical faces, where face
  ``i`` separates cells ``i - 1`` and ``i`` (faces 0 and m are exterior);
* y flux components live on the ``(m, n + 1)`` horizontal faces.

The discrete gradient is defined as the negative adjoint of the divergence
restricted to wall-admissible fluxes: wall faces (exterior walls and every
face of an obstacle cell) carry zero, door faces get the one-sided difference
obtained by eliminating a zero exterior value. This makes
``<grad p, phi> + <p, div phi> = 0`` exact for every wall-zeroed ``phi``.

Isotropic per-cell magnitudes of a face field pair the staggered components
through *cell-anchored groups*: cell ``(i, j)`` owns its right and top faces,
and additionally the left face when ``i == 0`` and the bottom face when
``j == 0`` so that every face belongs to exactly one group.  Group norms keep
ball projections and vector shrinkage pointwise per cell, hence exact
proximal maps for the primal-dual solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, ShapeMismatchError

_EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class GridSpec:
    """Uniform m-by-n cell grid with square cells of side h.

    The physical domain is ``[0, m*h] x [0, n*h]``.
    """

    m: int
    n: int
    h: float

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 1 or self.n < 1:
            raise ConfigurationError("grid needs a positive integer cell count per direction")
        if not self.h > 0:
            raise ConfigurationError("mesh size h must be positive")

    @property
    def extent(self):
        return (self.m * self.h, self.n * self.h)

    def cell_centers(self):
        """Meshgrid of cell-center coordinates, shape (m, n) each."""
        x = (np.arange(self.m) + 0.5) * self.h
        y = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")


def _as_array(values, shape, what):
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise ShapeMismatchError(f"{what} has shape {arr.shape}, expected {shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScalarField:
    """Cell-averaged scalar quantity on an m-by-n grid (density, pressure, ...)."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        object.__setattr__(self, "values", _as_array(self.values, (self.grid.m, self.grid.n), "scalar field"))

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros((grid.m, grid.n)), grid)

    @classmethod
    def full(cls, grid, value):
        return cls(np.full((grid.m, grid.n), float(value)), grid)

    @classmethod
    def from_function(cls, grid, fn):
        """Evaluate ``fn(x, y)`` at cell centers."""
        x, y = grid.cell_centers()
        return cls(np.broadcast_to(np.asarray(fn(x, y), dtype=float), (grid.m, grid.n)).copy(), grid)


@dataclass(frozen=True)
class FluxField:
    """Staggered face-valued vector field: x on (m+1, n) faces, y on (m, n+1)."""

    x: np.ndarray
    y: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        g = self.grid
        object.__setattr__(self, "x", _as_array(self.x, (g.m + 1, g.n), "x flux"))
        object.__setattr__(self, "y", _as_array(self.y, (g.m, g.n + 1), "y flux"))

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros((grid.m + 1, grid.n)), np.zeros((grid.m, grid.n + 1)), grid)


@dataclass(frozen=True)
class BoundarySpec:
    """Per-face boundary classification plus obstacle cells.

    ``wall_*`` marks zero-normal-flux faces: every exterior face that is not
    a door, and every face of an obstacle cell.  ``door_*`` faces are
    exterior faces left unconstrained (outflow).  ``source_*`` marks the wall
    faces that carry a boundary inflow rate.
    """

    grid: GridSpec
    wall_x: np.ndarray
    wall_y: np.ndarray
    door_x: np.ndarray
    door_y: np.ndarray
    source_x: np.ndarray
    source_y: np.ndarray
    obstacle: np.ndarray

    def __post_init__(self):
        g = self.grid
        shapes = {
            "wall_x": (g.m + 1, g.n), "door_x": (g.m + 1, g.n), "source_x": (g.m + 1, g.n),
            "wall_y": (g.m, g.n + 1), "door_y": (g.m, g.n + 1), "source_y": (g.m, g.n + 1),
            "obstacle": (g.m, g.n),
        }
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=bool)
            if arr.shape != shape:
                raise ShapeMismatchError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self._validate()

    def _validate(self):
        g = self.grid
        ext_x = np.zeros((g.m + 1, g.n), dtype=bool)
        ext_x[0, :] = ext_x[g.m, :] = True
        ext_y = np.zeros((g.m, g.n + 1), dtype=bool)
        ext_y[:, 0] = ext_y[:, g.n] = True

        if np.any(self.door_x & ~ext_x) or np.any(self.door_y & ~ext_y):
            raise ConfigurationError("door faces must lie on the exterior boundary")
        if np.any(self.door_x & self.wall_x) or np.any(self.door_y & self.wall_y):
            raise ConfigurationError("a face cannot be both door and wall")
        if np.any(ext_x & ~self.door_x & ~self.wall_x) or np.any(ext_y & ~self.door_y & ~self.wall_y):
            raise ConfigurationError("every exterior face must be classified door or wall")

        # interior faces are walls exactly where they touch an obstacle cell
        obst_x = np.zeros((g.m + 1, g.n), dtype=bool)
        obst_x[1:g.m, :] = self.obstacle[:-1, :] | self.obstacle[1:, :]
        obst_y = np.zeros((g.m, g.n + 1), dtype=bool)
        obst_y[:, 1:g.n] = self.obstacle[:, :-1] | self.obstacle[:, 1:]
        if np.any((self.wall_x & ~ext_x) != (obst_x & ~ext_x)) or \
           np.any((self.wall_y & ~ext_y) != (obst_y & ~ext_y)):
            raise ConfigurationError("interior wall faces must coincide with obstacle-cell faces")

        if np.any(self.door_cells & self.obstacle):
            raise ConfigurationError("door faces must not be attached to obstacle cells")
        if np.any(self.source_x & ~self.wall_x) or np.any(self.source_y & ~self.wall_y):
            raise ConfigurationError("source faces must be wall faces")
        if np.any(self.source_x & ~ext_x) or np.any(self.source_y & ~ext_y):
            raise ConfigurationError("source faces must lie on the exterior boundary")

    @cached_property
    def door_cells(self):
        """Cells adjacent to at least one door face."""
        g = self.grid
        cells = np.zeros((g.m, g.n), dtype=bool)
        cells[0, :] |= self.door_x[0, :]
        cells[g.m - 1, :] |= self.door_x[g.m, :]
        cells[:, 0] |= self.door_y[:, 0]
        cells[:, g.n - 1] |= self.door_y[:, g.n]
        return cells

    @cached_property
    def reachable(self):
        """Non-obstacle cells connected to a door cell through non-obstacle cells."""
        fluid = ~self.obstacle
        if not self.door_cells.any():
            return np.zeros_like(fluid)
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        labels, _ = ndimage.label(fluid, structure=structure)
        door_labels = np.unique(labels[self.door_cells & fluid])
        door_labels = door_labels[door_labels > 0]
        return np.isin(labels, door_labels) & fluid


def edge_face_mask(grid, edge, lo, hi):
    """Boolean face mask for the exterior-edge segment [lo, hi] (physical units).

    A face belongs to the segment when its midpoint lies in the closed
    interval.  A non-empty segment too thin to capture any midpoint rounds to
    the single nearest face, so point-like openings stay usable.

    Returns ``(axis, mask)`` with axis "x" or "y" and the mask in the
    corresponding flux layout.
    """
    if edge not in _EDGES:
        raise ConfigurationError(f"unknown edge {edge!r}, expected one of {_EDGES}")
    if hi < lo:
        raise ConfigurationError(f"empty segment [{lo}, {hi}] on edge {edge!r}")
    g = grid
    length = g.n * g.h if edge in ("left", "right") else g.m * g.h
    if lo < -1e-9 or hi > length + 1e-9:
        raise ConfigurationError(f"segment [{lo}, {hi}] exceeds the {edge} edge length {length:.6g}")
    count = g.n if edge in ("left", "right") else g.m
    mids = (np.arange(count) + 0.5) * g.h
    sel = (mids >= lo - 1e-12) & (mids <= hi + 1e-12)
    if not sel.any():
        sel[np.argmin(np.abs(mids - 0.5 * (lo + hi)))] = True

    if edge in ("left", "right"):
        mask = np.zeros((g.m + 1, g.n), dtype=bool)
        mask[0 if edge == "left" else g.m, sel] = True
        return "x", mask
    mask = np.zeros((g.m, g.n + 1), dtype=bool)
    mask[sel, 0 if edge == "bottom" else g.n] = True
    return "y", mask


def rect_cell_mask(grid, x0, x1, y0, y1):
    """Cells whose centers lie in the closed rectangle [x0,x1] x [y0,y1]."""
    if x1 < x0 or y1 < y0:
        raise ConfigurationError(f"empty rectangle [{x0},{x1}]x[{y0},{y1}]")
    w, hgt = grid.extent
    if x0 < -1e-9 or y0 < -1e-9 or x1 > w + 1e-9 or y1 > hgt + 1e-9:
        raise ConfigurationError(f"rectangle [{x0},{x1}]x[{y0},{y1}] exceeds the domain [0,{w:.6g}]x[0,{hgt:.6g}]")
    x, y = grid.cell_centers()
    eps = 1e-12
    return (x >= x0 - eps) & (x <= x1 + eps) & (y >= y0 - eps) & (y <= y1 + eps)


def boundary_from_segments(grid, doors, obstacles=(), sources=()):
    """Build a BoundarySpec from edge segments and obstacle rectangles.

    Parameters
    ----------
    doors, sources : iterable of (edge, lo, hi)
        Exterior segments, with edge one of left/right/bottom/top.
    obstacles : iterable of (x0, x1, y0, y1) rectangles or boolean cell masks.
    """
    g = grid
    door_x = np.zeros((g.m + 1, g.n), dtype=bool)
    door_y = np.zeros((g.m, g.n + 1), dtype=bool)
    for edge, lo, hi in doors:
        axis, mask = edge_face_mask(g, edge, lo, hi)
        if axis == "x":
            door_x |= mask
        else:
            door_y |= mask

    obstacle = np.zeros((g.m, g.n), dtype=bool)
    for obst in obstacles:
        if isinstance(obst, np.ndarray):
            obstacle |= obst.astype(bool)
        else:
            obstacle |= rect_cell_mask(g, *obst)

    wall_x = np.zeros((g.m + 1, g.n), dtype=bool)
    wall_y = np.zeros((g.m, g.n + 1), dtype=bool)
    wall_x[0, :] = wall_x[g.m, :] = True
    wall_y[:, 0] = wall_y[:, g.n] = True
    wall_x &= ~door_x
    wall_y &= ~door_y
    wall_x[1:g.m, :] |= obstacle[:-1, :] | obstacle[1:, :]
    wall_y[:, 1:g.n] |= obstacle[:, :-1] | obstacle[:, 1:]
    # exterior faces of obstacle cells are walls even if a door was requested there
    ext_obst_x = np.zeros_like(wall_x)
    ext_obst_x[0, :] = obstacle[0, :]
    ext_obst_x[g.m, :] = obstacle[g.m - 1, :]
    ext_obst_y = np.zeros_like(wall_y)
    ext_obst_y[:, 0] = obstacle[:, 0]
    ext_obst_y[:, g.n] = obstacle[:, g.n - 1]
    if np.any(door_x & ext_obst_x) or np.any(door_y & ext_obst_y):
        raise ConfigurationError("a door segment overlaps an obstacle cell")

    source_x = np.zeros_like(wall_x)
    source_y = np.zeros_like(wall_y)
    for edge, lo, hi in sources:
        axis, mask = edge_face_mask(g, edge, lo, hi)
        if axis == "x":
            source_x |= mask
        else:
            source_y |= mask

    return BoundarySpec(g, wall_x, wall_y, door_x, door_y, source_x, source_y, obstacle)


def apply_wall_zeros(flux, boundary):
    """Return a copy of ``flux`` with every wall face forced to zero (idempotent)."""
    fx = flux.x.copy()
    fy = flux.y.copy()
    fx[boundary.wall_x] = 0.0
    fy[boundary.wall_y] = 0.0
    return FluxField(fx, fy, flux.grid)


# raw-array kernels shared with the solvers -------------------------------

def div_arrays(fx, fy, h):
    return (fx[1:, :] - fx[:-1, :]) / h + (fy[:, 1:] - fy[:, :-1]) / h


def grad_arrays(values, boundary):
    g = boundary.grid
    h = g.h
    gx = np.empty((g.m + 1, g.n))
    gy = np.empty((g.m, g.n + 1))
    gx[1:g.m, :] = (values[1:, :] - values[:-1, :]) / h
    gx[0, :] = values[0, :] / h
    gx[g.m, :] = -values[g.m - 1, :] / h
    gy[:, 1:g.n] = (values[:, 1:] - values[:, :-1]) / h
    gy[:, 0] = values[:, 0] / h
    gy[:, g.n] = -values[:, g.n - 1] / h
    gx[boundary.wall_x] = 0.0
    gy[boundary.wall_y] = 0.0
    return gx, gy


def cell_face_norms(fx, fy):
    """Euclidean magnitude of the cell-anchored face group of every cell.

    Cell (i, j) pairs its right and top faces, plus the exterior left/bottom
    faces on the first column/row, so each face is counted exactly once.
    """
    sq = fx[1:, :] ** 2
    sq[0, :] += fx[0, :] ** 2
    sq = sq + fy[:, 1:] ** 2
    sq[:, 0] += fy[:, 0] ** 2
    return np.sqrt(sq)


def scale_cell_faces(fx, fy, factor):
    """Scale every face by its owning cell's factor, in place."""
    fx[1:, :] *= factor
    fx[0, :] *= factor[0, :]
    fy[:, 1:] *= factor
    fy[:, 0] *= factor[:, 0]


# public operators ---------------------------------------------------------

def divergence(phi):
    """Discrete divergence: per-cell net outflow of a face flux, divided by h.

    Wall-face zeros are assumed already enforced (see ``apply_wall_zeros``).
    """
    return ScalarField(div_arrays(phi.x, phi.y, phi.grid.h), phi.grid)


def gradient(p, boundary):
    """Discrete gradient, the negative adjoint of ``divergence``.

    Interior faces carry forward differences, door faces the one-sided
    difference against an eliminated zero exterior value, wall faces zero.
    """
    if p.grid != boundary.grid:
        raise ShapeMismatchError("scalar field and boundary use different grids")
    gx, gy = grad_arrays(p.values, boundary)
    return FluxField(gx, gy, p.grid)


def inner_product(u, v):
    """h^2-weighted inner product of two scalar fields."""
    if u.grid != v.grid:
        raise ShapeMismatchError("inner product of fields on different grids")
    return u.grid.h ** 2 * float(np.sum(u.values * v.values))


def inner_product_flux(a, b):
    """h^2-weighted inner product of two face fields (both components)."""
    if a.grid != b.grid:
        raise ShapeMismatchError("inner product of fluxes on different grids")
    return a.grid.h ** 2 * (float(np.sum(a.x * b.x)) + float(np.sum(a.y * b.y)))


def operator_norm_estimate(grid, boundary, tol=1e-13, max_iter=20000):
    """Power-iteration estimate of the gradient operator norm.

    Iterates ``v <- -div(grad(v))`` from a fixed pseudo-random start, so the
    result is deterministic.  The Rayleigh quotient approaches the largest
    eigenvalue from below, hence the estimate never exceeds the analytic
    bound sqrt(8)/h.
    """
    rng = np.random.default_rng(20240811)
    v = rng.standard_normal((grid.m, grid.n))
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    v /= norm
    lam = 0.0
    for _ in range(max_iter):
        gx, gy = grad_arrays(v, boundary)
        w = -div_arrays(gx, gy, grid.h)
        lam_new = float(np.sum(v * w))
        wn = np.linalg.norm(w)
        if wn == 0.0:
            return 0.0
        v = w / wn
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1.0):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))
