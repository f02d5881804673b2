"""Weighted minimum-flow correction of an overloaded density.

Given a predicted density that may exceed the packing bound, the correction
solves

    minimize    tau * sum_cells k |Phi|   (or tau/2 * |Phi|^2)
    subject to  rho - tau * div(Phi) = rho_target,   0 <= rho <= 1,

with zero normal flux on walls and free flux through doors.  The solver is a
Chambolle-Pock primal-dual iteration whose proximal maps are pointwise: a box
clamp on the density, vector shrinkage (or uniform scaling in the quadratic
mode) on the flux, and a constant shift on the dual pressure.

Internally the flux is carried in the scaled variable psi = tau * Phi, which
leaves the problem unchanged (the homogeneous cost is 1-homogeneous and the
quadratic cost rescales) while making the step-size bound
alpha * beta * (||grad||^2 + 1) < 1 tight.  Results are reported in Phi.

The dual pressure certificates come from the problem's duality: at the
optimum the pressure is supported on saturated cells (p * (1 - rho) = 0) and
its gradient stays inside the pointwise ball of radius k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ShapeMismatchError
from .grid import (
    BoundarySpec,
    FluxField,
    ScalarField,
    cell_face_norms,
    div_arrays,
    grad_arrays,
    operator_norm_estimate,
    scale_cell_faces,
)

MODES = ("homogeneous", "quadratic")
_STEP_SAFETY = 0.95
_GAP_FLOOR = -1e-8


@dataclass(frozen=True)
class PDParams:
    """Primal-dual solver configuration.

    ``None`` entries are replaced by solver defaults: the dual step alpha,
    primal steps satisfying the operator-norm stability bound against the
    constraint map (block-preconditioned in the correction solver unless an
    explicit beta forces uniform steps), and per-solver budgets and
    tolerances.  Explicit alpha and beta are validated against
    alpha * beta * K^2 < 1 when the solver runs.
    """

    alpha: float | None = None
    beta: float | None = None
    theta: float = 1.0
    max_iter: int | None = None
    tol: float | None = None
    gap_tol: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError("theta must lie in [0, 1]")
        for name in ("alpha", "beta", "tol", "gap_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigurationError("max_iter must be a positive integer")


def resolve_step_sizes(params, k_squared, default_alpha=None):
    """Fill in missing alpha/beta and enforce alpha*beta*K^2 < 1."""
    alpha, beta = params.alpha, params.beta
    if alpha is None and beta is None:
        if default_alpha is not None:
            alpha = default_alpha
        else:
            alpha = np.sqrt(_STEP_SAFETY / k_squared)
    if beta is None:
        beta = _STEP_SAFETY / (alpha * k_squared)
    if alpha is None:
        alpha = _STEP_SAFETY / (beta * k_squared)
    if alpha * beta * k_squared >= 1.0:
        raise ConfigurationError(
            f"step sizes violate alpha*beta*K^2 < 1 (got {alpha * beta * k_squared:.6g})"
        )
    return float(alpha), float(beta)


def _correction_steps(params, div_norm_squared):
    """Dual step and per-block primal steps for the correction iteration.

    With beta unset the primal steps are block-preconditioned: the density
    block couples to the pressure through the identity and can take a large
    step, the flux block through the divergence and must scale with its
    norm.  Convergence needs alpha * (b_rho + b_psi * ||div||^2) < 1; an
    explicit beta selects the uniform scheme with the classical bound
    alpha * beta * (||div||^2 + 1) < 1.
    """
    alpha = params.alpha if params.alpha is not None else 1.0
    if params.beta is not None:
        alpha, beta = resolve_step_sizes(params, div_norm_squared + 1.0)
        return alpha, beta, beta
    share = 0.5 * _STEP_SAFETY
    return alpha, share / alpha, share / (alpha * div_norm_squared)


@dataclass(frozen=True)
class CorrectionProblem:
    """One correction step: data, congestion weight, and boundary sources.

    ``eta_x``/``eta_y`` carry the inflow rate on source faces (zero
    elsewhere); the rate enters the constraint as a deposit of tau * eta / h
    into the cell adjacent to each source face, so the injected mass per
    step is tau * h * sum(eta).
    """

    rho_tilde: ScalarField
    weight_k: ScalarField
    tau: float
    boundary: BoundarySpec
    mode: str = "homogeneous"
    eta_x: np.ndarray | None = None
    eta_y: np.ndarray | None = None

    def __post_init__(self):
        g = self.boundary.grid
        if self.rho_tilde.grid != g or self.weight_k.grid != g:
            raise ShapeMismatchError("fields and boundary must share one grid")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        fluid = ~self.boundary.obstacle
        if np.any(self.rho_tilde.values < -1e-12):
            raise DomainError("predicted density must be nonnegative")
        if np.any(np.abs(self.rho_tilde.values[self.boundary.obstacle]) > 1e-12):
            raise DomainError("predicted density must vanish on obstacle cells")
        if np.any(self.weight_k.values < 0):
            raise DomainError("congestion weight must be nonnegative")
        if self.mode == "homogeneous" and np.any(self.weight_k.values[fluid] <= 0):
            raise DomainError("homogeneous mode needs a strictly positive weight outside obstacles")
        for name, shape, mask in (
            ("eta_x", (g.m + 1, g.n), self.boundary.source_x),
            ("eta_y", (g.m, g.n + 1), self.boundary.source_y),
        ):
            eta = getattr(self, name)
            if eta is None:
                continue
            eta = np.array(eta, dtype=float)
            if eta.shape != shape:
                raise ShapeMismatchError(f"{name} has shape {eta.shape}, expected {shape}")
            if np.any(eta[~mask] != 0.0):
                raise ConfigurationError(f"{name} must vanish outside source faces")
            eta.setflags(write=False)
            object.__setattr__(self, name, eta)

    def rho_target(self):
        """Prediction output plus the per-step boundary-source deposit."""
        g = self.boundary.grid
        target = self.rho_tilde.values.copy()
        scale = self.tau / g.h
        if self.eta_x is not None:
            target[0, :] += scale * self.eta_x[0, :]
            target[g.m - 1, :] += scale * self.eta_x[g.m, :]
        if self.eta_y is not None:
            target[:, 0] += scale * self.eta_y[:, 0]
            target[:, g.n - 1] += scale * self.eta_y[:, g.n]
        return ScalarField(target, g)

    def injected_mass(self):
        """Mass added by the boundary source during one step."""
        g = self.boundary.grid
        total = 0.0
        if self.eta_x is not None:
            total += float(self.eta_x.sum())
        if self.eta_y is not None:
            total += float(self.eta_y.sum())
        return self.tau * g.h * total


@dataclass(frozen=True)
class ComplementarityResiduals:
    sign_comp: float
    dual_feas: float
    constraint_res: float


@dataclass
class PDResult:
    """Corrected density with optimality certificates."""

    rho: ScalarField
    flux: FluxField
    pressure: ScalarField
    gap: float
    comp: ComplementarityResiduals
    iterations: int
    converged: bool
    _psi: tuple = field(default=None, repr=False)


def _shrink(fx, fy, threshold):
    """Groupwise vector shrinkage, the proximal map of the weighted flux norm."""
    norms = cell_face_norms(fx, fy)
    factor = np.zeros_like(norms)
    alive = norms > threshold
    np.divide(threshold, norms, out=factor, where=alive)
    factor = np.where(alive, 1.0 - factor, 0.0)
    scale_cell_faces(fx, fy, factor)


def prox_primal(rho, phi, beta, problem):
    """Proximal map of the primal objective at step size beta.

    The density component clamps to [0, 1].  The flux component applies
    per-cell vector shrinkage with threshold beta * tau * k in homogeneous
    mode, or the uniform scaling 1 / (1 + beta * tau) in quadratic mode.
    Wall faces are re-zeroed afterwards.
    """
    g = problem.boundary.grid
    rho_new = np.clip(rho.values, 0.0, 1.0)
    fx, fy = phi.x.copy(), phi.y.copy()
    if problem.mode == "homogeneous":
        _shrink(fx, fy, beta * problem.tau * problem.weight_k.values)
    else:
        scale = 1.0 / (1.0 + beta * problem.tau)
        fx *= scale
        fy *= scale
    fx[problem.boundary.wall_x] = 0.0
    fy[problem.boundary.wall_y] = 0.0
    return ScalarField(rho_new, g), FluxField(fx, fy, g)


def prox_dual(p, alpha, rho_target):
    """Proximal map of the conjugate constraint indicator: p - alpha * rho_target.

    Via the Moreau identity the projection onto the singleton constraint set
    reduces to the constant map, so the dual update is this shift.
    """
    if p.grid != rho_target.grid:
        raise ShapeMismatchError("pressure and target must share one grid")
    return ScalarField(p.values - alpha * rho_target.values, p.grid)


def _gap_arrays(rho, psx, psy, p, rho_src, problem):
    """Duality gap of the current iterate, certified through the flux pairing.

    The dual value pairs the pressure gradient with the flux, which equals
    the density pairing <p, rho_src - rho> up to the constraint residual but
    keeps the gap exactly nonnegative for ball-feasible pressures: per cell
    it is the Cauchy-Schwarz slack k * |psi| - grad(p) . psi.
    """
    bnd = problem.boundary
    g = bnd.grid
    h2 = g.h ** 2
    tau = problem.tau
    fluid = ~bnd.obstacle
    k = problem.weight_k.values
    pf = p.copy()
    pf[bnd.obstacle] = 0.0
    if problem.mode == "homogeneous":
        primal = h2 * float(np.sum((k * cell_face_norms(psx, psy))[fluid]))
        # the exit condition on the pressure is carried by the one-sided
        # door-face gradients inside the ball constraint, so scaling into
        # the ball is the entire feasibility projection
        gx, gy = grad_arrays(pf, bnd)
        norms = cell_face_norms(gx, gy)
        ratio = float(np.max(norms[fluid] / k[fluid], initial=0.0))
        if ratio > 1.0:
            gx /= ratio
            gy /= ratio
        dual = h2 * (float(np.sum(gx * psx)) + float(np.sum(gy * psy)))
    else:
        primal = h2 / (2.0 * tau) * (float(np.sum(psx ** 2)) + float(np.sum(psy ** 2)))
        gx, gy = grad_arrays(pf, bnd)
        dual = h2 * (float(np.sum(gx * psx)) + float(np.sum(gy * psy)))
        dual -= 0.5 * tau * h2 * (float(np.sum(gx ** 2)) + float(np.sum(gy ** 2)))
    return primal - dual


def duality_gap(result, problem):
    """Primal objective minus the (feasibility-projected) dual objective."""
    psx = problem.tau * result.flux.x
    psy = problem.tau * result.flux.y
    return _gap_arrays(
        result.rho.values, psx, psy, result.pressure.values,
        problem.rho_target().values, problem,
    )


def _reported_pressure(p_iter, problem):
    """Certified dual candidate derived from the raw iteration variable.

    Among the non-unique dual optima, report the nonnegative pressure
    (clipping is 1-Lipschitz per face, so ball feasibility of the gradient
    survives it), scaled into the gradient ball in homogeneous mode.  Every
    certificate then describes this one returned object.
    """
    bnd = problem.boundary
    pressure = np.maximum(-p_iter, 0.0)
    pressure[bnd.obstacle] = 0.0
    if problem.mode == "homogeneous":
        fluid = ~bnd.obstacle
        gx, gy = grad_arrays(pressure, bnd)
        norms = cell_face_norms(gx, gy)
        ratio = float(np.max(norms[fluid] / problem.weight_k.values[fluid], initial=0.0))
        if ratio > 1.0:
            pressure /= ratio
    return pressure


def _certificates(rho, psx, psy, p, rho_src, problem):
    bnd = problem.boundary
    g = bnd.grid
    fluid = ~bnd.obstacle
    resid = rho - div_arrays(psx, psy, g.h) - rho_src
    constraint_res = float(np.sqrt(g.h ** 2 * np.sum(resid ** 2)))
    sign_comp = float(np.max(np.abs(p * (1.0 - rho))[fluid], initial=0.0))
    if problem.mode == "homogeneous":
        gx, gy = grad_arrays(p, bnd)
        dual_feas = float(np.max(
            (cell_face_norms(gx, gy) - problem.weight_k.values)[fluid], initial=0.0,
        ))
        dual_feas = max(dual_feas, 0.0)
    else:
        dual_feas = 0.0
    return ComplementarityResiduals(sign_comp, dual_feas, constraint_res)


def pd_solve(problem, params=None, warm=None, check_every=25):
    """Chambolle-Pock iteration for the correction problem.

    Each sweep performs the primal proximal step on (rho, psi) against the
    extrapolated pressure, the dual shift against the constraint residual,
    and the extragradient update.  Convergence requires the constraint
    residual below ``tol``, a certified duality gap below ``gap_tol``,
    and small pressure complementarity; budget exhaustion returns the final
    iterate flagged non-converged.

    Parameters
    ----------
    warm : PDResult, optional
        Previous result used to initialize (rho, psi, p); with slowly
        varying data this cuts the iteration count drastically.
    """
    params = params if params is not None else PDParams()
    bnd = problem.boundary
    g = bnd.grid
    h = g.h
    tau = problem.tau
    quadratic = problem.mode == "quadratic"

    opnorm = operator_norm_estimate(g, bnd)
    alpha, beta_rho, beta_psi = _correction_steps(params, opnorm ** 2)
    theta = params.theta
    max_iter = params.max_iter if params.max_iter is not None else 50000
    tol = params.tol if params.tol is not None else 1e-6
    gap_tol = params.gap_tol if params.gap_tol is not None else 1e-4

    rho_src = problem.rho_target().values
    k = problem.weight_k.values
    threshold = beta_psi * k
    qfactor = 1.0 / (1.0 + beta_psi / tau)

    # the iteration's dual variable is the negative of the reported pressure:
    # the saddle pairing <p, rho - tau*div(Phi) - rho_target> makes congested
    # cells carry p <= 0, while the certificates are stated for the pressure
    # that is positive on congestion
    if warm is not None and warm._psi is not None:
        rho = warm.rho.values.copy()
        psx, psy, p = (a.copy() for a in warm._psi)
    else:
        rho = np.clip(rho_src, 0.0, 1.0)
        rho[bnd.obstacle] = 0.0
        psx = np.zeros((g.m + 1, g.n))
        psy = np.zeros((g.m, g.n + 1))
        p = np.zeros((g.m, g.n))
    pbar = p.copy()

    converged = False
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rho = np.clip(rho - beta_rho * pbar, 0.0, 1.0)
        rho[bnd.obstacle] = 0.0
        gx, gy = grad_arrays(pbar, bnd)
        psx = psx - beta_psi * gx
        psy = psy - beta_psi * gy
        if quadratic:
            psx *= qfactor
            psy *= qfactor
        else:
            _shrink(psx, psy, threshold)
        psx[bnd.wall_x] = 0.0
        psy[bnd.wall_y] = 0.0

        resid = rho - div_arrays(psx, psy, h) - rho_src
        p_new = p + alpha * resid
        p_new[bnd.obstacle] = 0.0
        pbar = p_new + theta * (p_new - p)
        p = p_new

        if it == 1 or it % check_every == 0 or it == max_iter:
            res = float(np.sqrt(h * h * np.sum(resid ** 2)))
            if res <= tol:
                pressure = _reported_pressure(p, problem)
                gap = _gap_arrays(rho, psx, psy, pressure, rho_src, problem)
                comp = _certificates(rho, psx, psy, pressure, rho_src, problem)
                if _GAP_FLOOR <= gap <= gap_tol and comp.sign_comp <= 1e-3:
                    converged = True
                    break

    if not converged:
        pressure = _reported_pressure(p, problem)
        gap = _gap_arrays(rho, psx, psy, pressure, rho_src, problem)
        comp = _certificates(rho, psx, psy, pressure, rho_src, problem)
    return PDResult(
        rho=ScalarField(rho, g),
        flux=FluxField(psx / tau, psy / tau, g),
        pressure=ScalarField(pressure, g),
        gap=gap,
        comp=comp,
        iterations=it,
        converged=converged,
        _psi=(psx, psy, p.copy()),
    )


def granular_multiplier(result, problem):
    """Diagnostic reconstruction of the granular mobility |Phi| / k.

    Only meaningful in homogeneous mode on cells carrying flux; returned as
    zero where the flux vanishes.  This is not a certified quantity.
    """
    k = problem.weight_k.values
    norms = cell_face_norms(result.flux.x, result.flux.y)
    safe = np.maximum(k, np.finfo(float).tiny)
    return ScalarField(np.where(norms > 0, norms / safe, 0.0), problem.boundary.grid)
