"""Entropic optimal transport on the circle and the Lipschitz descent direction.

The steepest descent of a balanced nodal functional over 1-Lipschitz
perturbations is (up to sign) the optimal Kantorovich potential for the
geodesic cost between the functional's positive and negative parts.  The
potential is approximated by a log-domain Sinkhorn iteration with
epsilon-scaling, extended to the whole grid by a metric extension, and made
feasible by an infimal convolution with the metric.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .circle import (
    CircleGrid,
    P1Function,
    RadialFunction,
    geodesic_distance,
    lipschitz_seminorm,
    weighted_mass_vector,
)
from .measures import AtomicMeasure, BalancedMeasurePair, pair_apply

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000


class StationaryInputError(ValueError):
    """Transport between empty (zero-mass) measures is undefined."""


class StationaryPairError(ValueError):
    """The balanced pair carries no mass; there is no descent direction."""


def cost_matrix(mu: AtomicMeasure, nu: AtomicMeasure) -> np.ndarray:
    """Geodesic distances between the supports of mu (rows) and nu (columns)."""
    return geodesic_distance(mu.angles[:, None], nu.angles[None, :])


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return m.squeeze(axis) + np.log(np.sum(np.exp(a - m), axis=axis))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Nonnegative coupling with recorded (not assumed) marginal residuals."""

    matrix: np.ndarray
    residual_row: float
    residual_col: float


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    plan: TransportPlan
    log_u: np.ndarray
    log_v: np.ndarray
    f: np.ndarray
    g: np.ndarray
    eps: float
    iterations: int
    converged: bool


def sinkhorn(mu: AtomicMeasure, nu: AtomicMeasure, eps: float,
             tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             f0: np.ndarray | None = None,
             g0: np.ndarray | None = None) -> SinkhornResult:
    """Log-domain Sinkhorn iteration at a single regularization level.

    Masses are normalized internally to probability vectors; the returned
    plan couples the normalized measures.  Scaling vectors are kept as
    logarithms (log_u, log_v) so that small eps does not underflow; f0, g0
    are optional warm-start dual potentials in cost units.  Non-convergence
    within max_iter produces a warning and a result flagged as unconverged,
    not a hard failure.
    """
    if eps <= 0.0:
        raise ValueError("regularization eps must be positive")
    beta_mu, beta_nu = mu.mass, nu.mass
    if beta_mu <= 0.0 or beta_nu <= 0.0:
        raise StationaryInputError("transport requires measures with positive mass")
    a = mu.weights / beta_mu
    b = nu.weights / beta_nu
    C = cost_matrix(mu, nu)
    la = np.log(a)
    lb = np.log(b)
    # potentials f, g with plan P = exp((f + g - C)/eps + la + lb)
    f = np.zeros(a.size) if f0 is None else np.asarray(f0, dtype=float).copy()
    g = np.zeros(b.size) if g0 is None else np.asarray(g0, dtype=float).copy()

    def log_plan(f, g):
        return (f[:, None] + g[None, :] - C) / eps + la[:, None] + lb[None, :]

    iterations = 0
    converged = False
    res_row = res_col = np.inf
    while iterations < max_iter:
        f = -eps * _logsumexp((g[None, :] - C) / eps + lb[None, :], axis=1)
        g = -eps * _logsumexp((f[:, None] - C) / eps + la[:, None], axis=0)
        iterations += 1
        P = np.exp(log_plan(f, g))
        res_row = float(np.abs(P.sum(axis=1) - a).max())
        res_col = float(np.abs(P.sum(axis=0) - b).max())
        if max(res_row, res_col) <= tol:
            converged = True
            break
    else:
        P = np.exp(log_plan(f, g))
    if not converged:
        warnings.warn(
            f"sinkhorn did not reach tol={tol:g} in {max_iter} iterations "
            f"(residuals {res_row:g}, {res_col:g})",
            RuntimeWarning,
        )
    log_u = f / eps + la
    log_v = g / eps + lb
    plan = TransportPlan(matrix=P, residual_row=res_row, residual_col=res_col)
    return SinkhornResult(plan=plan, log_u=log_u, log_v=log_v, f=f, g=g, eps=eps,
                          iterations=iterations, converged=converged)


def sinkhorn_eps_scaling(mu: AtomicMeasure, nu: AtomicMeasure,
                         eps_min: float | None = None,
                         eps_start: float | None = None,
                         tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER) -> SinkhornResult:
    """Warm-started Sinkhorn over a geometric eps schedule.

    Starts at eps_start (default 0.1 * max cost), halves down to eps_min
    (default 1e-3 * max cost) and reuses the scaled potentials between
    levels.  Returns the result of the final level.
    """
    C_max = float(cost_matrix(mu, nu).max())
    scale = C_max if C_max > 0.0 else 1.0
    if eps_start is None:
        eps_start = 0.1 * scale
    if eps_min is None:
        eps_min = 1e-3 * scale
    if eps_min <= 0.0:
        raise ValueError("eps_min must be positive")
    eps_start = max(eps_start, eps_min)

    levels = [eps_start]
    while levels[-1] > eps_min:
        levels.append(max(0.5 * levels[-1], eps_min))

    f = g = None
    result = None
    for level, eps in enumerate(levels):
        level_tol = tol if level == len(levels) - 1 else max(tol, 1e-7)
        result = sinkhorn(mu, nu, eps, tol=level_tol, max_iter=max_iter,
                          f0=f, g0=g)
        f, g = result.f, result.g
    return result


def plan_cost(plan: TransportPlan | np.ndarray, C: np.ndarray) -> float:
    """Frobenius inner product of a plan with a cost matrix."""
    P = plan.matrix if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    C = np.asarray(C, dtype=float)
    if P.shape != C.shape:
        raise ValueError(f"plan shape {P.shape} does not match cost shape {C.shape}")
    return float(np.sum(P * C))


def exact_plan_cost(mu: AtomicMeasure, nu: AtomicMeasure) -> float:
    """Optimal (unregularized) transport cost between small atomic measures.

    Linear-programming oracle over the coupling polytope; intended for test
    and verification use on modest atom counts.
    """
    if mu.mass <= 0.0 or nu.mass <= 0.0:
        raise StationaryInputError("transport requires measures with positive mass")
    n1, n2 = mu.n_atoms, nu.n_atoms
    C = cost_matrix(mu, nu)
    A_eq = np.zeros((n1 + n2, n1 * n2))
    for i in range(n1):
        A_eq[i, i * n2:(i + 1) * n2] = 1.0
    for j in range(n2):
        A_eq[n1 + j, j::n2] = 1.0
    b_eq = np.concatenate([mu.weights, nu.weights])
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP oracle failed: {res.message}")
    return float(res.fun)


@dataclass(frozen=True, eq=False)
class DualPotential:
    phi: P1Function
    is_lip1: bool


def dual_from_scalings(log_u: np.ndarray, log_v: np.ndarray, eps: float,
                       mu: AtomicMeasure, nu: AtomicMeasure,
                       grid: CircleGrid) -> DualPotential:
    """Recover the Kantorovich potential and extend it to all grid nodes.

    The potential is eps*log(u) on the mu atoms and -eps*log(v) on the nu
    atoms (the conjugate of a potential for a metric cost is its negative).
    Node values come from averaging the lower and upper metric (McShane)
    extensions, min_k (phi_k + d(theta, theta_k)) and
    max_k (phi_k - d(theta, theta_k)); the average is 1-Lipschitz and
    reproduces the atom values whenever those are metrically consistent.
    """
    atom_angles = np.concatenate([mu.angles, nu.angles])
    atom_values = np.concatenate([eps * np.asarray(log_u), -eps * np.asarray(log_v)])
    dist = geodesic_distance(grid.nodes[:, None], atom_angles[None, :])
    lower = np.min(atom_values[None, :] + dist, axis=1)
    upper = np.max(atom_values[None, :] - dist, axis=1)
    phi = P1Function(grid, 0.5 * (lower + upper))
    return DualPotential(phi=phi, is_lip1=True)


def project_lip1(phi: DualPotential | P1Function) -> P1Function:
    """Infimal convolution with the metric at the grid nodes.

    Returns the largest function that is 1-Lipschitz over all node pairs and
    lies below the input at every node; fixes 1-Lipschitz inputs exactly.
    """
    fn = phi.phi if isinstance(phi, DualPotential) else phi
    if not np.all(np.isfinite(fn.values)):
        raise ValueError("potential must be finite before projection")
    nodes = fn.grid.nodes
    dist = geodesic_distance(nodes[:, None], nodes[None, :])
    values = np.min(fn.values[None, :] + dist, axis=1)
    return P1Function(fn.grid, values)


def descent_direction(pair: BalancedMeasurePair, f: RadialFunction,
                      eps: float | None = None, tol: float = DEFAULT_TOL,
                      eps_start: float | None = None,
                      max_iter: int = DEFAULT_MAX_ITER):
    """Steepest-descent direction of a balanced pair over Lipschitz-1 functions.

    Runs epsilon-scaled Sinkhorn down to eps, recovers and projects the dual
    potential, then shifts the negated potential to satisfy the weighted
    zero-mean constraint exactly and normalizes it to Lipschitz constant 1.
    Returns the direction and its predicted descent (the pair applied to it),
    which is nonpositive at convergence.
    """
    if pair.stationary:
        raise StationaryPairError("balanced pair is stationary; no direction exists")
    result = sinkhorn_eps_scaling(pair.mu, pair.nu, eps_min=eps,
                                  eps_start=eps_start, tol=tol, max_iter=max_iter)
    potential = dual_from_scalings(result.log_u, result.log_v, result.eps,
                                   pair.mu, pair.nu, f.grid)
    psi = project_lip1(potential)
    g_values = -psi.values
    w = weighted_mass_vector(f)
    g_values = g_values - (w @ g_values) / w.sum()
    seminorm = lipschitz_seminorm(P1Function(f.grid, g_values))
    if seminorm <= 0.0:
        raise StationaryPairError("projected potential is constant; stationary point")
    g = P1Function(f.grid, g_values / seminorm)
    predicted = pair_apply(pair, g)
    return g, predicted
