"""Travel-cost potentials and spontaneous velocities on three room layouts.

Solves the weighted eikonal problem for a plain room, a room with an
expensive central region, and a room with an obstacle, then plots the
potential with the velocity field overlaid.  Writes eikonal_demo.png.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crowdflow import (
    GridSpec,
    ScalarField,
    boundary_from_segments,
    solve_eikonal,
    velocity_from_potential,
)
from crowdflow.eikonal import cell_velocity

m = 60
grid = GridSpec(m, m, 1.0 / m)

layouts = {
    "plain room": dict(
        boundary=boundary_from_segments(grid, doors=[("right", 0.4, 0.6)]),
        speed=ScalarField.full(grid, 1.0),
    ),
    "costly center": dict(
        boundary=boundary_from_segments(grid, doors=[("right", 0.0, 0.4), ("right", 0.9, 1.0)]),
        speed=ScalarField.from_function(
            grid, lambda x, y: np.exp(-3.0 * ((x - 0.5) ** 2 + (y - 0.5) ** 2))
        ),
    ),
    "obstacle": dict(
        boundary=boundary_from_segments(
            grid, doors=[("right", 0.4, 0.6)], obstacles=[(0.55, 0.65, 0.2, 0.8)]
        ),
        speed=ScalarField.full(grid, 1.0),
    ),
}

fig, axes = plt.subplots(1, len(layouts), figsize=(5 * len(layouts), 4.6))
for ax, (title, layout) in zip(axes, layouts.items()):
    sol = solve_eikonal(grid, layout["boundary"], layout["speed"])
    print(f"{title}: converged={sol.converged} iterations={sol.iterations}")
    velocity = velocity_from_potential(sol, layout["boundary"])
    vx, vy = cell_velocity(velocity, grid)

    phi = np.where(sol.reachable, sol.phi.values, np.nan)
    x, y = grid.cell_centers()
    pcm = ax.pcolormesh(x, y, phi, shading="nearest", cmap="viridis")
    stride = 4
    ax.quiver(
        x[::stride, ::stride], y[::stride, ::stride],
        vx[::stride, ::stride], vy[::stride, ::stride],
        color="red", scale=28, width=0.004,
    )
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.colorbar(pcm, ax=ax, label="travel cost")

fig.tight_layout()
fig.savefig("eikonal_demo.png", dpi=130)
print("wrote eikonal_demo.png")
