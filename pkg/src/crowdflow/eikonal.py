"""Weighted eikonal equation ||grad(phi)|| = f with phi = 0 at the doors.

The travel-cost potential is computed as the maximizer of the cell sum of u
subject to u = 0 on door cells and a pointwise gradient-ball constraint
||grad_h(u)|| <= f, solved by Chambolle-Pock primal-dual iterations.  The
spontaneous velocity field is the normalized negative gradient of the
potential, interpolated back to faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beckmann import _STEP_SAFETY, PDParams, resolve_step_sizes
from .errors import ConfigurationError, DomainError, ShapeMismatchError
from .grid import (
    FluxField,
    ScalarField,
    cell_face_norms,
    div_arrays,
    grad_arrays,
    operator_norm_estimate,
    scale_cell_faces,
)

#: gradient magnitudes below this are treated as degenerate when normalizing
NORMALIZATION_FLOOR = 1e-8

#: spontaneous velocities share the staggered face layout of fluxes
VelocityField = FluxField


@dataclass(frozen=True)
class SpeedField:
    """Strictly positive cost-per-unit-length field driving the eikonal equation."""

    field: ScalarField

    def validate(self, boundary):
        values = self.field.values
        fluid = ~boundary.obstacle
        if not np.all(np.isfinite(values)):
            raise DomainError("speed field contains non-finite values")
        if np.any(values[fluid] <= 0.0):
            raise DomainError("speed field must be strictly positive outside obstacles")


@dataclass
class EikonalSolution:
    """Travel-cost potential with solver diagnostics.

    ``phi`` is zero on door cells; unreachable cells (no path to a door
    through non-obstacle cells) carry the finite cap value instead of a
    diverging cost.  ``residuals`` records the relative iterate change.
    """

    phi: ScalarField
    residuals: list
    converged: bool
    iterations: int
    monotone: bool
    reachable: np.ndarray
    cap: float
    objectives: list = field(default_factory=list, repr=False)
    _dual: tuple = field(default=None, repr=False)


def _objective_monotone(history):
    """Windowed non-decrease check of the objective after a burn-in."""
    if len(history) <= 100:
        return True
    tail = np.asarray(history[100:])
    nwin = len(tail) // 50
    if nwin < 2:
        return True
    means = tail[: nwin * 50].reshape(nwin, 50).mean(axis=1)
    scale = max(abs(means[-1]), 1e-30)
    return bool(np.all(np.diff(means) >= -1e-3 * scale))


def solve_eikonal(grid, boundary, speed, params=None, warm=None):
    """Solve the discrete eikonal problem on the reachable part of the grid.

    Parameters
    ----------
    speed : SpeedField or ScalarField
        Positive cost per unit length on cells.
    params : PDParams, optional
        Primal-dual configuration; defaults to alpha = 1/h and the step
        product just inside the stability bound.
    warm : EikonalSolution, optional
        Previous solution used to initialize the iteration.

    Returns
    -------
    EikonalSolution
        Flagged non-converged (not an error) when the budget runs out.
    """
    if isinstance(speed, ScalarField):
        speed = SpeedField(speed)
    if speed.field.grid != grid or boundary.grid != grid:
        raise ShapeMismatchError("speed field and boundary must live on the same grid")
    if not boundary.door_cells.any():
        raise ConfigurationError("eikonal problem needs a non-empty door set")
    speed.validate(boundary)

    params = params if params is not None else PDParams()
    f = speed.field.values
    reach = boundary.reachable
    fluid = ~boundary.obstacle
    free = reach & ~boundary.door_cells
    pinned = ~free

    opnorm = operator_norm_estimate(grid, boundary)
    # a dual-heavy step split polices the gradient ball tightly while the
    # objective push beta stays large enough to climb in few iterations
    default_alpha = 10.0 * np.sqrt(_STEP_SAFETY) / max(opnorm, 1e-30)
    alpha, beta = resolve_step_sizes(params, opnorm ** 2, default_alpha=default_alpha)
    theta = params.theta
    max_iter = params.max_iter if params.max_iter is not None else 20000
    tol = params.tol if params.tol is not None else 1e-6

    if warm is not None:
        u = warm.phi.values.copy()
        u[pinned] = 0.0
        if warm._dual is not None:
            qx, qy = (a.copy() for a in warm._dual)
        else:
            qx = np.zeros((grid.m + 1, grid.n))
            qy = np.zeros((grid.m, grid.n + 1))
    else:
        u = np.zeros((grid.m, grid.n))
        qx = np.zeros((grid.m + 1, grid.n))
        qy = np.zeros((grid.m, grid.n + 1))
    qbx, qby = qx.copy(), qy.copy()

    residuals = []
    objectives = []
    converged = False
    it = 0
    tiny = np.finfo(float).tiny
    check_every = 25
    stall_window = 8
    best_u = u.copy()
    best_obj = -np.inf
    certified = []
    for it in range(1, max_iter + 1):
        u_new = u + beta * div_arrays(qbx, qby, grid.h)
        u_new += beta
        u_new[pinned] = 0.0

        gx, gy = grad_arrays(u_new, boundary)
        wx = qx + alpha * gx
        wy = qy + alpha * gy
        # Moreau: prox of the ball indicator's conjugate via the projection
        px, py = wx / alpha, wy / alpha
        norms = cell_face_norms(px, py)
        factor = np.minimum(1.0, f / np.maximum(norms, tiny))
        scale_cell_faces(px, py, factor)
        qx_new = wx - alpha * px
        qy_new = wy - alpha * py

        qbx = qx_new + theta * (qx_new - qx)
        qby = qy_new + theta * (qy_new - qy)
        qx, qy = qx_new, qy_new

        change = float(np.linalg.norm(u_new - u)) / max(float(np.linalg.norm(u_new)), 1e-30)
        residuals.append(change)
        objectives.append(grid.h ** 2 * float(u_new[fluid].sum()))
        u = u_new

        if it % check_every == 0 or it == max_iter:
            # scaling by the worst constraint ratio certifies feasibility
            # exactly (pinned zeros are preserved), giving a monotone
            # certified objective whose stagnation is the stopping signal
            ggx, ggy = grad_arrays(u, boundary)
            norms_now = cell_face_norms(ggx, ggy)
            ratio = float(np.max(norms_now[fluid] / f[fluid], initial=0.0))
            cand = u / ratio if ratio > 1.0 else u
            obj = grid.h ** 2 * float(cand[fluid].sum())
            if obj > best_obj:
                best_obj = obj
                best_u = cand.copy()
            certified.append(best_obj)
            if len(certified) > stall_window:
                gain = certified[-1] - certified[-1 - stall_window]
                if gain <= tol * max(abs(certified[-1]), 1e-30):
                    converged = True
                    break

    fmax = float(f[fluid].max()) if fluid.any() else 1.0
    cap = 2.0 * (grid.m + grid.n) * grid.h * fmax
    phi = best_u
    phi[~reach] = cap
    return EikonalSolution(
        phi=ScalarField(phi, grid),
        residuals=residuals,
        converged=converged,
        iterations=it,
        monotone=_objective_monotone(objectives),
        reachable=reach,
        cap=cap,
        objectives=objectives,
        _dual=(qx, qy),
    )


def cell_velocity(v, grid):
    """Cell-centered velocity components recovered by averaging adjacent faces."""
    vcx = 0.5 * (v.x[:-1, :] + v.x[1:, :])
    vcy = 0.5 * (v.y[:, :-1] + v.y[:, 1:])
    return vcx, vcy


def velocity_from_potential(sol, boundary):
    """Unit descent direction of the travel cost, on faces.

    Cell velocities are the normalized negative cell-centered gradient
    (zero where the gradient magnitude falls under the normalization floor,
    and on obstacle or unreachable cells).  Face values average the two
    adjacent cell velocities; wall faces are forced to zero and door faces
    keep the interior cell's value so outflow stays possible.
    """
    grid = sol.phi.grid
    if boundary.grid != grid:
        raise ShapeMismatchError("solution and boundary use different grids")
    gx, gy = grad_arrays(sol.phi.values, boundary)
    # door-face one-sided differences would fabricate descent out of a flat
    # potential; the outward component at doors comes from the copy rule below
    gx[boundary.door_x] = 0.0
    gy[boundary.door_y] = 0.0
    gcx = 0.5 * (gx[:-1, :] + gx[1:, :])
    gcy = 0.5 * (gy[:, :-1] + gy[:, 1:])
    mag = np.hypot(gcx, gcy)
    ok = mag >= NORMALIZATION_FLOOR
    vcx = np.where(ok, -gcx / np.where(ok, mag, 1.0), 0.0)
    vcy = np.where(ok, -gcy / np.where(ok, mag, 1.0), 0.0)
    dead = boundary.obstacle | ~sol.reachable
    vcx[dead] = 0.0
    vcy[dead] = 0.0

    m, n = grid.m, grid.n
    vx = np.zeros((m + 1, n))
    vy = np.zeros((m, n + 1))
    vx[1:m, :] = 0.5 * (vcx[:-1, :] + vcx[1:, :])
    vy[:, 1:n] = 0.5 * (vcy[:, :-1] + vcy[:, 1:])
    vx[0, :] = np.where(boundary.door_x[0, :], vcx[0, :], 0.0)
    vx[m, :] = np.where(boundary.door_x[m, :], vcx[m - 1, :], 0.0)
    vy[:, 0] = np.where(boundary.door_y[:, 0], vcy[:, 0], 0.0)
    vy[:, n] = np.where(boundary.door_y[:, n], vcy[:, n - 1], 0.0)
    vx[boundary.wall_x] = 0.0
    vy[boundary.wall_y] = 0.0
    return FluxField(vx, vy, grid)
