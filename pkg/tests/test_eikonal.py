"""Eikonal solver against closed forms and a graph-distance oracle."""

import heapq

import numpy as np
import pytest

from crowdflow import (
    ConfigurationError,
    DomainError,
    GridSpec,
    ScalarField,
    boundary_from_segments,
    solve_eikonal,
    velocity_from_potential,
)
from crowdflow.eikonal import EikonalSolution, SpeedField
from crowdflow.grid import cell_face_norms, grad_arrays


def dijkstra_distance(grid, boundary, f, sources):
    """Shortest weighted path distance on the cell graph, axis and diagonal moves.

    Edge cost is the move length times the mean of the two cell costs; this
    is an independent metric oracle for the continuous travel cost.
    """
    m, n = grid.m, grid.n
    h = grid.h
    dist = np.full((m, n), np.inf)
    heap = []
    for (i, j) in sources:
        dist[i, j] = 0.0
        heapq.heappush(heap, (0.0, i, j))
    moves = [(1, 0, h), (-1, 0, h), (0, 1, h), (0, -1, h),
             (1, 1, h * np.sqrt(2)), (1, -1, h * np.sqrt(2)),
             (-1, 1, h * np.sqrt(2)), (-1, -1, h * np.sqrt(2))]
    blocked = boundary.obstacle
    while heap:
        d, i, j = heapq.heappop(heap)
        if d > dist[i, j]:
            continue
        for di, dj, length in moves:
            a, b = i + di, j + dj
            if not (0 <= a < m and 0 <= b < n) or blocked[a, b]:
                continue
            nd = d + length * 0.5 * (f[i, j] + f[a, b])
            if nd < dist[a, b] - 1e-15:
                dist[a, b] = nd
                heapq.heappush(heap, (nd, a, b))
    return dist


def synthetic_solution(values, grid, boundary):
    return EikonalSolution(
        phi=ScalarField(values, grid),
        residuals=[],
        converged=True,
        iterations=0,
        monotone=True,
        reachable=boundary.reachable,
        cap=float(np.max(values)) + 1.0,
    )


def test_plane_distance_to_full_right_edge():
    m = 50
    g = GridSpec(m, m, 1.0 / m)
    b = boundary_from_segments(g, doors=[("right", 0.0, 1.0)])
    sol = solve_eikonal(g, b, ScalarField.full(g, 1.0))
    assert sol.converged
    x, _ = g.cell_centers()
    err = np.max(np.abs(sol.phi.values - (1.0 - x)))
    assert err <= 2 * g.h


def test_matches_dijkstra_on_single_door():
    m = 8
    g = GridSpec(m, m, 1.0 / m)
    # door rounds to the single nearest face on the right edge
    b = boundary_from_segments(g, doors=[("right", 0.5, 0.5)])
    f = np.ones((m, m))
    sol = solve_eikonal(g, b, ScalarField(f, g))
    assert sol.converged
    sources = [tuple(idx) for idx in np.argwhere(b.door_cells)]
    oracle = dijkstra_distance(g, b, f, sources)
    assert np.max(np.abs(sol.phi.values - oracle)) <= 3 * g.h


def test_velocity_of_dijkstra_case_is_unit_and_descends():
    m = 8
    g = GridSpec(m, m, 1.0 / m)
    b = boundary_from_segments(g, doors=[("right", 0.5, 0.5)])
    sol = solve_eikonal(g, b, ScalarField.full(g, 1.0))
    v = velocity_from_potential(sol, b)
    vcx = 0.5 * (v.x[:-1, :] + v.x[1:, :])
    vcy = 0.5 * (v.y[:, :-1] + v.y[:, 1:])
    assert np.max(np.hypot(vcx, vcy)) <= 1.0 + 1e-8
    phi = sol.phi.values
    # every face with appreciable velocity points toward decreasing phi; the
    # tolerance absorbs interpolation noise on nearly flat ridges
    interior_flow = v.x[1:m, :]
    diff = phi[1:, :] - phi[:-1, :]
    assert np.all(interior_flow * diff <= 1e-4)
    interior_flow_y = v.y[:, 1:m]
    diff_y = phi[:, 1:] - phi[:, :-1]
    assert np.all(interior_flow_y * diff_y <= 1e-4)


def test_bump_cost_steers_around_center():
    m = 40
    g = GridSpec(m, m, 1.0 / m)
    b = boundary_from_segments(g, doors=[("right", 0.0, 0.4), ("right", 0.9, 1.0)])
    f = ScalarField.from_function(g, lambda x, y: np.exp(-3.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)))
    sol = solve_eikonal(g, b, f)
    assert sol.converged
    v = velocity_from_potential(sol, b)
    vcx = 0.5 * (v.x[:-1, :] + v.x[1:, :])
    vcy = 0.5 * (v.y[:, :-1] + v.y[:, 1:])
    # upstream of the expensive bump the flow deflects sideways
    i = int(0.35 * m)
    j = m // 2
    assert np.max(np.abs(vcy[i, j - 2:j + 3])) > 0.1
    # the straight ray through the bump costs more than the detoured potential
    assert sol.phi.values[i, j] < f.values[i, j] * (1.0 - 0.35) + 0.05


def test_velocity_from_linear_ramp():
    g = GridSpec(10, 6, 0.1)
    b = boundary_from_segments(g, doors=[("right", 0.0, 0.6)])
    x, _ = g.cell_centers()
    sol = synthetic_solution(1.0 - x, g, b)
    v = velocity_from_potential(sol, b)
    np.testing.assert_allclose(v.x[1:10, :], 1.0, atol=1e-12)
    np.testing.assert_allclose(v.y, 0.0, atol=1e-12)
    np.testing.assert_allclose(v.x[10, :], 1.0, atol=1e-12)  # door keeps interior value


def test_velocity_of_constant_potential_is_zero():
    g = GridSpec(7, 7, 0.2)
    b = boundary_from_segments(g, doors=[("right", 0.0, 1.4)])
    sol = synthetic_solution(np.full((7, 7), 3.0), g, b)
    v = velocity_from_potential(sol, b)
    assert np.all(v.x == 0.0)
    assert np.all(v.y == 0.0)


def test_dual_feasibility_and_nonnegativity_at_convergence():
    m = 20
    g = GridSpec(m, m, 1.0 / m)
    b = boundary_from_segments(g, doors=[("right", 0.2, 0.8)])
    f = ScalarField.from_function(g, lambda x, y: 1.0 + 0.5 * np.sin(3 * x) ** 2 + 0.3 * y)
    sol = solve_eikonal(g, b, f)
    assert sol.converged
    gx, gy = grad_arrays(sol.phi.values, b)
    fluid = ~b.obstacle
    violation = np.max((cell_face_norms(gx, gy) - f.values)[fluid])
    assert violation <= 1e-3 * float(f.values.max())
    assert sol.phi.values.min() >= -1e-6


def test_doubling_cost_doubles_potential():
    m = 16
    g = GridSpec(m, m, 1.0 / m)
    b = boundary_from_segments(g, doors=[("right", 0.3, 0.7)])
    sol1 = solve_eikonal(g, b, ScalarField.full(g, 1.0))
    sol2 = solve_eikonal(g, b, ScalarField.full(g, 2.0))
    scale = float(np.max(sol2.phi.values))
    # 1-homogeneity of the constraint set, up to independent solver noise
    assert np.max(np.abs(2.0 * sol1.phi.values - sol2.phi.values)) <= 1e-2 * scale


def test_monotone_flag_tracks_objective_history():
    from crowdflow import PDParams

    m = 16
    g = GridSpec(m, m, 1.0 / m)
    b = boundary_from_segments(g, doors=[("right", 0.0, 1.0)])
    # pure climb phase: the objective only grows, so no flag
    short = solve_eikonal(g, b, ScalarField.full(g, 1.0), PDParams(max_iter=300))
    assert short.monotone
    assert len(short.objectives) == short.iterations

    from crowdflow.eikonal import _objective_monotone

    climbing = list(np.linspace(0.0, 1.0, 400))
    assert _objective_monotone(climbing)
    sagging = climbing[:200] + list(np.linspace(1.0, 0.5, 200))
    assert not _objective_monotone(sagging)


def test_error_conditions():
    g = GridSpec(6, 6, 0.25)
    no_doors = boundary_from_segments(g, doors=[])
    with pytest.raises(ConfigurationError):
        solve_eikonal(g, no_doors, ScalarField.full(g, 1.0))
    b = boundary_from_segments(g, doors=[("right", 0.0, 1.5)])
    with pytest.raises(DomainError):
        solve_eikonal(g, b, ScalarField.zeros(g))


def test_budget_exhaustion_is_flagged_not_fatal():
    from crowdflow import PDParams

    g = GridSpec(12, 12, 1.0 / 12)
    b = boundary_from_segments(g, doors=[("right", 0.0, 1.0)])
    sol = solve_eikonal(g, b, ScalarField.full(g, 1.0), PDParams(max_iter=5))
    assert not sol.converged
    assert sol.iterations == 5


def test_speed_field_validation_masks_obstacles():
    g = GridSpec(8, 8, 0.125)
    b = boundary_from_segments(g, doors=[("right", 0.0, 1.0)], obstacles=[(0.25, 0.5, 0.25, 0.5)])
    f = np.ones((8, 8))
    f[b.obstacle] = 0.0  # irrelevant on obstacle cells
    SpeedField(ScalarField(f, g)).validate(b)
    sol = solve_eikonal(g, b, ScalarField(f, g))
    assert sol.converged
    assert np.all(sol.phi.values[b.obstacle] == sol.cap)
