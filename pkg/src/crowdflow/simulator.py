"""Prediction-correction time loop over a scenario.

Each step advances the density along the eikonal velocity field with an
upwind transport step, deposits any boundary inflow, and projects the result
back onto admissible densities through the minimum-flow correction.  The
velocity is computed once up front, or refreshed periodically from the
current pressure when the coupled speed mode is active.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .beckmann import CorrectionProblem, PDParams, pd_solve
from .eikonal import solve_eikonal, velocity_from_potential
from .errors import ConfigurationError, CrowdFlowError, DomainError, SimulationError
from .grid import BoundarySpec, GridSpec, ScalarField, rect_cell_mask
from .transport import CFL_LIMIT, upwind_step


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation run."""

    grid: GridSpec
    boundary: BoundarySpec
    rho0: ScalarField
    f: ScalarField
    k: ScalarField
    T: float
    tau: float
    mode: str = "homogeneous"
    eta_x: np.ndarray | None = None
    eta_y: np.ndarray | None = None
    couple_every: int = 0
    couple_coeff: float = 0.0
    pd: PDParams | None = None
    snapshot_every: int = 1
    definition: object = field(default=None, compare=False)

    def validate(self):
        g = self.grid
        if self.boundary.grid != g or self.rho0.grid != g or self.f.grid != g or self.k.grid != g:
            raise ConfigurationError("scenario fields must share one grid")
        if not self.boundary.door_cells.any():
            raise ConfigurationError("scenario has an empty door set")
        if not self.T > 0 or not self.tau > 0:
            raise ConfigurationError("T and tau must be positive")
        if self.tau / g.h >= CFL_LIMIT:
            raise ConfigurationError(
                f"tau/h = {self.tau / g.h:.3f} violates the CFL bound {CFL_LIMIT} for unit speeds"
            )
        r = self.rho0.values
        if np.any(r < 0.0) or np.any(r > 1.0 + 1e-12):
            raise DomainError("initial density must lie in [0, 1]")
        if np.any(r[self.boundary.obstacle] != 0.0):
            raise DomainError("initial density must vanish on obstacle cells")
        if self.couple_every < 0:
            raise ConfigurationError("couple_every must be nonnegative")
        if self.mode not in ("homogeneous", "quadratic"):
            raise ConfigurationError("mode must be homogeneous or quadratic")

    @property
    def steps(self):
        return max(1, int(round(self.T / self.tau)))


@dataclass(frozen=True)
class Snapshot:
    """Per-timestep record: density, pressure, and scalar metrics."""

    step: int
    time: float
    rho: ScalarField
    pressure: ScalarField
    metrics: dict


def _snapshot(step, tau, rho, pressure, grid, outflux_cum, injected_cum, pd_iterations, gap):
    h2 = grid.h ** 2
    return Snapshot(
        step=step,
        time=step * tau,
        rho=rho,
        pressure=pressure,
        metrics={
            "total_mass": h2 * float(rho.values.sum()),
            "door_outflux_cum": outflux_cum,
            "max_density": float(rho.values.max()),
            "pd_iterations": pd_iterations,
            "gap": gap,
            "injected_cum": injected_cum,
        },
    )


def run(scenario, velocity_override=None):
    """Execute the prediction-correction loop and collect snapshots.

    Parameters
    ----------
    velocity_override : FluxField, optional
        Diagnostic hook replacing the eikonal velocity field; the eikonal
        stage is skipped entirely when given.

    Returns
    -------
    list of Snapshot
        The initial state, every ``snapshot_every``-th step, and the final
        step.  A non-converged correction is recorded in the snapshot
        metrics but does not abort the run.
    """
    scenario.validate()
    g = scenario.grid
    bnd = scenario.boundary
    tau = scenario.tau
    h2 = g.h ** 2

    if velocity_override is not None:
        if velocity_override.grid != g:
            raise ConfigurationError("velocity override lives on the wrong grid")
        velocity = velocity_override
        eik = None
    else:
        eik = solve_eikonal(g, bnd, scenario.f, scenario.pd)
        velocity = velocity_from_potential(eik, bnd)

    rho = scenario.rho0
    pressure = ScalarField.zeros(g)
    outflux_cum = 0.0
    injected_cum = 0.0
    warm = None
    snapshots = [_snapshot(0, tau, rho, pressure, g, 0.0, 0.0, 0, 0.0)]

    for step in range(1, scenario.steps + 1):
        try:
            if (
                scenario.couple_every > 0
                and step > 1
                and (step - 1) % scenario.couple_every == 0
                and velocity_override is None
            ):
                f_now = ScalarField(
                    scenario.f.values * (1.0 + scenario.couple_coeff * pressure.values), g
                )
                eik = solve_eikonal(g, bnd, f_now, scenario.pd, warm=eik)
                velocity = velocity_from_potential(eik, bnd)

            report = upwind_step(rho, velocity, tau, bnd)
            outflux_cum += report.door_outflux

            problem = CorrectionProblem(
                rho_tilde=report.rho_out,
                weight_k=scenario.k,
                tau=tau,
                boundary=bnd,
                mode=scenario.mode,
                eta_x=scenario.eta_x,
                eta_y=scenario.eta_y,
            )
            result = pd_solve(problem, scenario.pd, warm=warm)
            warm = result
            injected_cum += problem.injected_mass()
            # mass removed by the correction; door flux up to the constraint residual
            outflux_cum += h2 * float(problem.rho_target().values.sum() - result.rho.values.sum())
            rho = result.rho
            pressure = result.pressure
        except CrowdFlowError as exc:
            raise SimulationError(step, exc) from exc

        if step % scenario.snapshot_every == 0 or step == scenario.steps:
            snapshots.append(
                _snapshot(step, tau, rho, pressure, g, outflux_cum, injected_cum,
                          result.iterations, result.gap)
            )
    return snapshots


@dataclass(frozen=True)
class ComparisonReport:
    """Per-step evacuation series of two runs sharing grid, start, and horizon."""

    times: np.ndarray
    mass_a: np.ndarray
    mass_b: np.ndarray
    door_density_a: np.ndarray
    door_density_b: np.ndarray
    linf_diff: np.ndarray
    l2_diff: np.ndarray

    @property
    def final_mass_a(self):
        return float(self.mass_a[-1])

    @property
    def final_mass_b(self):
        return float(self.mass_b[-1])


def _series(snapshots, door_cells):
    mass = np.array([s.metrics["total_mass"] for s in snapshots])
    door = np.array([float(s.rho.values[door_cells].mean()) for s in snapshots])
    times = np.array([s.time for s in snapshots])
    return times, mass, door


def _compare(snaps_a, snaps_b, door_cells, h):
    times, mass_a, door_a = _series(snaps_a, door_cells)
    _, mass_b, door_b = _series(snaps_b, door_cells)
    linf = np.array([
        float(np.max(np.abs(sa.rho.values - sb.rho.values)))
        for sa, sb in zip(snaps_a, snaps_b)
    ])
    l2 = np.array([
        float(np.sqrt(h * h * np.sum((sa.rho.values - sb.rho.values) ** 2)))
        for sa, sb in zip(snaps_a, snaps_b)
    ])
    return ComparisonReport(times, mass_a, mass_b, door_a, door_b, linf, l2)


def compare_runs(a, b):
    """Run two scenarios and report their per-step evacuation differences."""
    if a.grid != b.grid:
        raise ConfigurationError("compared scenarios must share the grid")
    same_boundary = all(
        np.array_equal(getattr(a.boundary, name), getattr(b.boundary, name))
        for name in ("wall_x", "wall_y", "door_x", "door_y", "obstacle")
    )
    if not same_boundary:
        raise ConfigurationError("compared scenarios must share the boundary")
    if not np.array_equal(a.rho0.values, b.rho0.values):
        raise ConfigurationError("compared scenarios must share the initial density")
    if a.T != b.T or a.tau != b.tau:
        raise ConfigurationError("compared scenarios must share T and tau")
    snaps_a = run(dataclasses.replace(a, snapshot_every=1))
    snaps_b = run(dataclasses.replace(b, snapshot_every=1))
    return _compare(snaps_a, snaps_b, a.boundary.door_cells, a.grid.h)


def _with_obstacle(scenario, mask):
    bnd = scenario.boundary
    g = scenario.grid
    obstacle = bnd.obstacle | mask
    wall_x = bnd.wall_x.copy()
    wall_y = bnd.wall_y.copy()
    wall_x[1:g.m, :] |= obstacle[:-1, :] | obstacle[1:, :]
    wall_y[:, 1:g.n] |= obstacle[:, :-1] | obstacle[:, 1:]
    wall_x[0, :] |= obstacle[0, :]
    wall_x[g.m, :] |= obstacle[g.m - 1, :]
    wall_y[:, 0] |= obstacle[:, 0]
    wall_y[:, g.n] |= obstacle[:, g.n - 1]
    new_bnd = BoundarySpec(
        g, wall_x, wall_y,
        bnd.door_x & ~wall_x, bnd.door_y & ~wall_y,
        bnd.source_x, bnd.source_y, obstacle,
    )
    return dataclasses.replace(scenario, boundary=new_bnd)


def obstacle_study(scenario, obstacle):
    """Run a scenario with and without an obstacle region and compare.

    Parameters
    ----------
    obstacle : (x0, x1, y0, y1) rectangle or boolean cell mask
        Must stay clear of door cells and of the initial mass.

    Returns
    -------
    ComparisonReport
        Series ``a`` is the unobstructed run, ``b`` the obstructed one.
    """
    g = scenario.grid
    if isinstance(obstacle, np.ndarray):
        mask = obstacle.astype(bool)
        if mask.shape != (g.m, g.n):
            raise ConfigurationError("obstacle mask has the wrong shape")
    else:
        mask = rect_cell_mask(g, *obstacle)
    if np.any(mask & scenario.boundary.door_cells):
        raise ConfigurationError("obstacle region touches a door")
    if np.any(scenario.rho0.values[mask] != 0.0):
        raise ConfigurationError("obstacle region overlaps the initial density")

    plain = dataclasses.replace(scenario, snapshot_every=1)
    blocked = dataclasses.replace(_with_obstacle(scenario, mask), snapshot_every=1)
    snaps_a = run(plain)
    snaps_b = run(blocked)
    return _compare(snaps_a, snaps_b, scenario.boundary.door_cells, g.h)
