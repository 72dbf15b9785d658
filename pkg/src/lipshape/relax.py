"""Relaxed steepest-descent solvers on the circle.

Two smooth stand-ins for the Lipschitz-constrained descent problem under the
weighted zero-mean constraint: a p-Laplacian penalty solved by a damped
Newton method with p-continuation, and a viscosity-regularized problem with
per-arc slope bounds solved exactly through its separable dual.  A small
linear-programming oracle provides the exact Lipschitz-1 minimizer for
cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq, linprog
from scipy.sparse.linalg import spsolve

from .circle import (
    P1Function,
    RadialFunction,
    geodesic_distance,
    weighted_mass_vector,
)
from .measures import NodalFunctional, apply

# Slope regularization inside the p-flux; removes the singular Hessian at
# zero slope without shifting the reported digits.
FLUX_DELTA = 1e-10

MAX_NEWTON_STEPS = 200
MAX_HALVINGS = 30
ORACLE_MAX_NODES = 32


class RelaxationError(RuntimeError):
    """Solver failure; carries the final residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class RelaxSolution:
    g: P1Function
    p_or_eps: float
    kkt_residual: float
    descent: float


def _difference_matrix(grid) -> sp.csr_matrix:
    """Sparse map from nodal values to per-arc slopes."""
    n = grid.n
    rows = np.repeat(np.arange(n), 2)
    cols = np.empty(2 * n, dtype=int)
    cols[0::2] = np.arange(n)
    cols[1::2] = (np.arange(n) + 1) % n
    data = np.empty(2 * n)
    data[0::2] = -1.0 / grid.arcs
    data[1::2] = 1.0 / grid.arcs
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def _kkt_solve(H: sp.spmatrix, w: np.ndarray, rhs_g: np.ndarray, rhs_c: float):
    n = w.size
    K = sp.bmat([[H, w[:, None]], [w[None, :], None]], format="csc")
    sol = spsolve(K, np.concatenate([rhs_g, [rhs_c]]))
    return sol[:n], sol[n]


def solve_plaplace(F: NodalFunctional, f: RadialFunction, p: float,
                   tol: float | None = None) -> RelaxSolution:
    """Minimize sum_e (1/p)|slope_e|^p h_e + <F, g> subject to <w, g> = 0.

    Newton iterations on the delta-regularized flux with a bordered system
    for the constraint multiplier; globalized by residual-monotone
    backtracking.  Continuation over even exponents warm-starts large p from
    the linear p=2 solution.
    """
    if p < 2:
        raise ValueError(f"exponent p must be >= 2, got {p}")
    grid = F.grid
    n = grid.n
    a = F.coeffs
    w = weighted_mass_vector(f)
    h = grid.arcs
    D = _difference_matrix(grid)
    if tol is None:
        tol = 1e-10 * max(np.abs(a).sum(), 1e-300)

    def residual(g, lam, pc):
        s = D @ g
        flux = (s * s + FLUX_DELTA**2) ** ((pc - 2.0) / 2.0) * s
        r_g = D.T @ (h * flux) + a + lam * w
        return r_g, float(w @ g), s

    # p = 2 start: the bordered system is linear and solved exactly
    H2 = (D.T @ sp.diags(h) @ D).tocsc()
    g, lam = _kkt_solve(H2, w, -a, 0.0)

    p_path = [2.0]
    q = 4.0
    while q < p:
        p_path.append(q)
        q += 2.0
    if p_path[-1] != p:
        p_path.append(float(p))

    res_norm = 0.0
    for pc in p_path[1:] if p > 2 else []:
        for _ in range(MAX_NEWTON_STEPS):
            r_g, r_c, s = residual(g, lam, pc)
            res_norm = max(np.abs(r_g).max(), abs(r_c))
            if res_norm <= tol:
                break
            rho = (s * s + FLUX_DELTA**2) ** ((pc - 4.0) / 2.0) * (
                (pc - 1.0) * s * s + FLUX_DELTA**2
            )
            H = (D.T @ sp.diags(h * rho) @ D).tocsc()
            dg, dlam = _kkt_solve(H, w, -r_g, -r_c)
            step = 1.0
            for _ in range(MAX_HALVINGS):
                g_new = g + step * dg
                lam_new = lam + step * dlam
                r_g_new, r_c_new, _ = residual(g_new, lam_new, pc)
                if max(np.abs(r_g_new).max(), abs(r_c_new)) < res_norm:
                    g, lam = g_new, lam_new
                    break
                step *= 0.5
            else:
                raise RelaxationError(
                    f"Newton line search stalled at p={pc:g}", res_norm)
        else:
            raise RelaxationError(
                f"Newton did not converge in {MAX_NEWTON_STEPS} steps at p={pc:g}",
                res_norm)

    r_g, r_c, _ = residual(g, lam, float(p))
    res_norm = max(np.abs(r_g).max(), abs(r_c))
    if res_norm > tol:
        raise RelaxationError(f"p-Laplace solve missed tolerance at p={p:g}", res_norm)
    gp = P1Function(grid, g)
    return RelaxSolution(g=gp, p_or_eps=float(p), kkt_residual=res_norm,
                         descent=apply(F, gp))


def _slope_objective_vector(F: NodalFunctional, f: RadialFunction) -> np.ndarray:
    """Linear coefficients of the slope variables after eliminating the shift.

    Writing g_k = g_0 + sum_{e<k} h_e s_e and fixing g_0 through <w, g> = 0
    turns <F, g> into q . s with q depending on the balanced coefficients.
    """
    grid = F.grid
    h = grid.arcs
    w = weighted_mass_vector(f)
    m = F.coeffs - (F.coeffs.sum() / w.sum()) * w
    # g_k = sum_{e<k} h_e s_e (up to a constant killed by the balanced m):
    # coefficient of s_e in sum_k m_k g_k is h_e * sum_{k>e} m_k
    tail = m.sum() - np.cumsum(m)
    return h * tail


def _reconstruct(grid, s: np.ndarray, f: RadialFunction) -> P1Function:
    g = np.concatenate([[0.0], np.cumsum(grid.arcs[:-1] * s[:-1])])
    w = weighted_mass_vector(f)
    g = g - (w @ g) / w.sum()
    return P1Function(grid, g)


def solve_viscosity(F: NodalFunctional, f: RadialFunction, eps: float,
                    tol: float = 1e-12) -> RelaxSolution:
    """Minimize <F, g> + (eps/2) sum_e h_e slope_e^2 with |slope_e| <= 1, <w, g> = 0.

    In slope variables the problem is separable with one linear coupling
    (periodicity), so the dual is a monotone scalar equation solved by
    bracketing; the primal is recovered in closed form per arc.
    """
    if eps <= 0.0:
        raise ValueError("viscosity eps must be positive")
    grid = F.grid
    h = grid.arcs
    q = _slope_objective_vector(F, f)

    def slopes(nu):
        return np.clip(-(q / h + nu) / eps, -1.0, 1.0)

    def closure(nu):
        return float(h @ slopes(nu))

    # closure is nonincreasing in nu; bracket the root
    lo, hi = -1.0, 1.0
    while closure(lo) < 0.0:
        lo *= 2.0
    while closure(hi) > 0.0:
        hi *= 2.0
    nu = brentq(closure, lo, hi, xtol=1e-15, rtol=8.9e-16)
    s = slopes(nu)
    g = _reconstruct(grid, s, f)

    # stationarity residual on inactive arcs plus the closure defect
    inactive = np.abs(s) < 1.0
    stat = np.abs(eps * s + q / h + nu)[inactive]
    kkt = max(stat.max() if stat.size else 0.0, abs(closure(nu)))
    if kkt > max(tol, 1e-9 * max(1.0, np.abs(q).max())):
        raise RelaxationError("viscosity dual solve missed tolerance", kkt)
    return RelaxSolution(g=g, p_or_eps=float(eps), kkt_residual=float(kkt),
                         descent=apply(F, g))


def solve_lip1_exact_small(F: NodalFunctional, f: RadialFunction) -> RelaxSolution:
    """Exact Lipschitz-1 constrained minimizer for small grids.

    Linear program over nodal values with the pairwise metric constraints
    |g_i - g_j| <= d(theta_i, theta_j) and <w, g> = 0; used as the oracle
    against the transport pipeline.  Refuses grids beyond 32 nodes.
    """
    grid = F.grid
    n = grid.n
    if n > ORACLE_MAX_NODES:
        raise ValueError(f"exact oracle is limited to {ORACLE_MAX_NODES} nodes, got {n}")
    w = weighted_mass_vector(f)
    dist = geodesic_distance(grid.nodes[:, None], grid.nodes[None, :])
    iu, ju = np.triu_indices(n, k=1)
    n_pairs = iu.size
    A_ub = np.zeros((2 * n_pairs, n))
    rows = np.arange(n_pairs)
    A_ub[rows, iu] = 1.0
    A_ub[rows, ju] = -1.0
    A_ub[n_pairs + rows, iu] = -1.0
    A_ub[n_pairs + rows, ju] = 1.0
    b_ub = np.concatenate([dist[iu, ju], dist[iu, ju]])
    res = linprog(F.coeffs, A_ub=A_ub, b_ub=b_ub,
                  A_eq=w[None, :], b_eq=np.zeros(1),
                  bounds=[(None, None)] * n, method="highs")
    if not res.success:
        raise RelaxationError(f"oracle LP failed: {res.message}", np.inf)
    g = P1Function(grid, res.x)
    return RelaxSolution(g=g, p_or_eps=np.inf, kkt_residual=0.0,
                         descent=apply(F, g))
