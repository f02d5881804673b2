"""Macroscopic congested crowd motion on a staggered grid.

The package alternates eikonal-driven transport (prediction) with a weighted
minimum-flow projection onto admissible densities (correction), both solved
by first-order primal-dual iterations.
"""

from .errors import (
    CFLViolation,
    ConfigurationError,
    CrowdFlowError,
    DomainError,
    MonotonicityError,
    ScenarioParseError,
    ShapeMismatchError,
    SimulationError,
)
from .grid import (
    BoundarySpec,
    FluxField,
    GridSpec,
    ScalarField,
    apply_wall_zeros,
    boundary_from_segments,
    divergence,
    edge_face_mask,
    gradient,
    inner_product,
    inner_product_flux,
    operator_norm_estimate,
    rect_cell_mask,
)
from .eikonal import (
    EikonalSolution,
    SpeedField,
    VelocityField,
    solve_eikonal,
    velocity_from_potential,
)
from .transport import TransportStepReport, cfl_check, upwind_step
from .beckmann import (
    CorrectionProblem,
    PDParams,
    PDResult,
    duality_gap,
    granular_multiplier,
    pd_solve,
    prox_dual,
    prox_primal,
)
from .simulator import ComparisonReport, Scenario, Snapshot, compare_runs, obstacle_study, run
from .scenario_io import parse_scenario, write_scenario
from .output import (
    read_density_csv,
    write_comparison_csv,
    write_density_csv,
    write_metrics_csv,
    write_pgm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
