"""Explicit donor-cell upwind step for the continuity equation.

The face flux takes the density from the cell the face velocity comes from,
for every sign combination.  Walls (and obstacle faces) carry no flux; door
faces let mass leave with the interior upwind value, and nothing enters from
outside, so the exterior acts as a zero-density reservoir.

For velocity fields obtained by averaging cell vectors of magnitude at most
one to faces, a CFL number below one half makes the update a convex
combination of neighboring densities, hence nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CFLViolation, DomainError, MonotonicityError, ShapeMismatchError
from .grid import FluxField, ScalarField

CFL_LIMIT = 0.5


@dataclass(frozen=True)
class TransportStepReport:
    """Result of one upwind step with its mass bookkeeping.

    Mass is conserved exactly up to the recorded door outflux:
    ``mass_after == mass_before - door_outflux`` to round-off.
    """

    rho_out: ScalarField
    mass_before: float
    mass_after: float
    door_outflux: float
    cfl_number: float


def cfl_check(v, tau, h):
    """CFL number max ||V_cell|| * tau / h of a face velocity field.

    Cell magnitudes are reconstructed by averaging the two adjacent face
    values per component.  Raises CFLViolation at or above one half.
    """
    if not tau > 0 or not h > 0:
        raise DomainError("tau and h must be positive")
    vcx = 0.5 * (v.x[:-1, :] + v.x[1:, :])
    vcy = 0.5 * (v.y[:, :-1] + v.y[:, 1:])
    cfl = float(np.max(np.hypot(vcx, vcy), initial=0.0)) * tau / h
    if cfl >= CFL_LIMIT:
        raise CFLViolation(cfl)
    return cfl


def upwind_step(rho, v, tau, boundary):
    """Advance the density by one explicit upwind step of length tau.

    Parameters
    ----------
    rho : ScalarField
        Current density, expected in [0, 1] up to round-off.
    v : FluxField
        Face velocities with zero wall and obstacle faces.
    tau : float
        Time step; must satisfy the CFL bound against ``v``.
    boundary : BoundarySpec

    Returns
    -------
    TransportStepReport
        The density may exceed one after the step; that is expected and the
        congestion correction handles it.
    """
    g = rho.grid
    if v.grid != g or boundary.grid != g:
        raise ShapeMismatchError("density, velocity and boundary must share one grid")
    if np.any(rho.values < -1e-9) or np.any(rho.values > 1.0 + 1e-6):
        raise DomainError("input density must lie in [0, 1] up to round-off")
    if np.any(v.x[boundary.wall_x] != 0.0) or np.any(v.y[boundary.wall_y] != 0.0):
        raise DomainError("velocity must vanish on wall and obstacle faces")
    cfl = cfl_check(v, tau, g.h)

    r = rho.values
    m, n = g.m, g.n
    fx = np.zeros((m + 1, n))
    fy = np.zeros((m, n + 1))
    vi = v.x[1:m, :]
    fx[1:m, :] = np.where(vi > 0.0, r[:-1, :], r[1:, :]) * vi
    v0 = v.x[0, :]
    fx[0, :] = np.where(v0 < 0.0, r[0, :] * v0, 0.0)
    vm = v.x[m, :]
    fx[m, :] = np.where(vm > 0.0, r[m - 1, :] * vm, 0.0)
    vj = v.y[:, 1:n]
    fy[:, 1:n] = np.where(vj > 0.0, r[:, :-1], r[:, 1:]) * vj
    w0 = v.y[:, 0]
    fy[:, 0] = np.where(w0 < 0.0, r[:, 0] * w0, 0.0)
    wn = v.y[:, n]
    fy[:, n] = np.where(wn > 0.0, r[:, n - 1] * wn, 0.0)

    out = r - (tau / g.h) * (fx[1:, :] - fx[:-1, :] + fy[:, 1:] - fy[:, :-1])
    if float(out.min(initial=0.0)) < -1e-12:
        raise MonotonicityError(
            f"negative density {out.min():.3e} from an upwind step at CFL {cfl:.3f}"
        )

    outflux = tau * g.h * (
        float(np.sum(fx[m, boundary.door_x[m, :]]))
        - float(np.sum(fx[0, boundary.door_x[0, :]]))
        + float(np.sum(fy[boundary.door_y[:, n], n]))
        - float(np.sum(fy[boundary.door_y[:, 0], 0]))
    )
    h2 = g.h ** 2
    mass_before = h2 * float(r.sum())
    mass_after = h2 * float(out.sum())
    return TransportStepReport(
        rho_out=ScalarField(out, g),
        mass_before=mass_before,
        mass_after=mass_after,
        door_outflux=outflux,
        cfl_number=cfl,
    )
