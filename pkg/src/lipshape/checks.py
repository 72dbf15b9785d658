"""Cross-validation property suite shared by the CLI and the test suite.

Each check returns measured numbers together with the bound it was tested
against, so callers can both print a report and assert on the raw values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import relax, transport
from .circle import (
    CircleGrid,
    P1Function,
    RadialFunction,
    geodesic_distance,
    lipschitz_seminorm,
    square_radial,
    uniform_grid,
    weighted_mass_vector,
)
from .fem2d import reference_disk_mesh
from .measures import (
    AtomicMeasure,
    BalancedMeasurePair,
    apply,
    balance_and_split,
    half_circle_step_functional,
    nodal_restriction,
)
from .shapederiv import assemble_derivative, energy, problem_spec


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    data: dict


def lipschitz_feasible(g: P1Function, tol: float = 1e-10) -> bool:
    """All-pairs metric bound for small grids, adjacent slopes otherwise."""
    if g.grid.n <= 64:
        d = geodesic_distance(g.grid.nodes[:, None], g.grid.nodes[None, :])
        gap = np.abs(g.values[:, None] - g.values[None, :]) - d
        return float(gap.max()) <= tol
    return lipschitz_seminorm(g) <= 1.0 + tol


def random_balanced_pair(rng, n_grid: int = 16, n_atoms: int = 8):
    """Balanced atomic pair supported on nodes of a random circle grid."""
    while True:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n_grid))
        if np.min(np.diff(angles, append=angles[0] + 2.0 * np.pi)) > 1e-3:
            break
    grid = CircleGrid(angles)
    idx = rng.permutation(n_grid)[:n_atoms]
    weights = rng.uniform(0.2, 1.0, n_atoms)
    half = n_atoms // 2
    beta = float(rng.uniform(0.5, 3.0))
    mu = AtomicMeasure(angles[idx[:half]], beta * weights[:half] / weights[:half].sum())
    nu = AtomicMeasure(angles[idx[half:]], beta * weights[half:] / weights[half:].sum())
    pair = BalancedMeasurePair(mu=mu, nu=nu, beta=beta, lambda_star=0.0,
                               stationary=False)
    return grid, pair


def check_duality(seed: int, trials: int = 20, eps: float = 1e-8,
                  bound: float = 1e-6) -> CheckResult:
    """Transport descent against the exact plan-cost oracle on random pairs."""
    rng = np.random.default_rng(seed)
    worst_cost = worst_lp = 0.0
    feasible = True
    residual_ok = True
    for _ in range(trials):
        grid, pair = random_balanced_pair(rng)
        f = RadialFunction(grid, np.ones(grid.n))
        result = transport.sinkhorn_eps_scaling(pair.mu, pair.nu, eps_min=eps)
        residual_ok &= max(result.plan.residual_row, result.plan.residual_col) <= 1e-9
        g, predicted = transport.descent_direction(pair, f, eps=eps)
        cost = transport.exact_plan_cost(pair.mu, pair.nu)
        worst_cost = max(worst_cost, abs(predicted + cost))
        oracle = relax.solve_lip1_exact_small(nodal_restriction(pair, grid), f)
        worst_lp = max(worst_lp, abs(predicted - oracle.descent))
        feasible &= lipschitz_feasible(g)
        w = weighted_mass_vector(f)
        feasible &= abs(float(w @ g.values)) <= 1e-10
    passed = worst_cost <= bound and worst_lp <= bound and feasible and residual_ok
    return CheckResult(
        name="duality",
        passed=passed,
        detail=f"max |descent + plan cost| = {worst_cost:.3e}, "
               f"max oracle mismatch = {worst_lp:.3e} (bound {bound:g})",
        data={"worst_cost": worst_cost, "worst_lp": worst_lp,
              "feasible": feasible, "residual_ok": residual_ok})


def random_lip1_direction(rng, grid: CircleGrid) -> P1Function:
    """Smooth random direction normalized to Lipschitz constant one."""
    n = grid.n
    modes = np.arange(1, 5)
    coeff_c = rng.standard_normal(modes.size)
    coeff_s = rng.standard_normal(modes.size)
    values = (coeff_c @ np.cos(np.outer(modes, grid.nodes))
              + coeff_s @ np.sin(np.outer(modes, grid.nodes)))
    g = P1Function(grid, values)
    return P1Function(grid, values / lipschitz_seminorm(g))


def check_gradient_consistency(seed: int, rings: int = 16,
                               t_values=(1e-2, 1e-3, 1e-4),
                               bound: float = 1e-2) -> CheckResult:
    """Finite differences of the discrete energy against the assembled
    derivative, both energies, three seeded Lipschitz-1 directions."""
    rng = np.random.default_rng(seed)
    ref = reference_disk_mesh(rings)
    grid = ref.grid
    f = square_radial(grid)
    worst_final = 0.0
    monotone = True
    rows = []
    for problem in ("nopde", "laplace"):
        spec = problem_spec(problem)
        functional = assemble_derivative(f, spec, rings)
        J0 = energy(f, spec, rings)
        for _ in range(3):
            g = random_lip1_direction(rng, grid)
            predicted = apply(functional, g)
            errors = []
            for t in t_values:
                ft = RadialFunction(grid, f.values + t * g.values)
                fd = (energy(ft, spec, rings) - J0) / t
                errors.append(abs(fd - predicted) / abs(predicted))
            monotone &= all(errors[k + 1] <= errors[k] for k in range(len(errors) - 1))
            worst_final = max(worst_final, errors[-1])
            rows.append((problem, errors))
    passed = worst_final <= bound and monotone
    return CheckResult(
        name="gradient-consistency",
        passed=passed,
        detail=f"max relative error at t={t_values[-1]:g}: {worst_final:.3e} "
               f"(bound {bound:g}), monotone {monotone}",
        data={"worst_final": worst_final, "monotone": monotone, "rows": rows})


def check_p_bound(n: int = 128, p_list=(2, 4, 6, 8, 10, 12, 14, 16),
                  margin_from: float = 4.0) -> CheckResult:
    """Descent of the p-relaxation within its proven distance of the
    Lipschitz optimum; at least 10% slack for larger exponents."""
    grid = uniform_grid(n)
    f = RadialFunction(grid, np.ones(n))
    chi = half_circle_step_functional(grid)
    pair = balance_and_split(chi, weighted_mass_vector(f))
    _, lip_descent = transport.descent_direction(pair, f, eps=1e-7)
    passed = True
    rows = []
    for p in p_list:
        sol = relax.solve_plaplace(chi, f, p)
        bound = (p / (p - 1.0)) ** (p - 1.0) * 2.0 * np.pi / p
        gap = sol.descent - lip_descent
        ok = sol.descent <= lip_descent + bound
        if p >= margin_from:
            ok &= gap <= 0.9 * bound
        passed &= ok and gap >= -1e-9
        rows.append((p, gap, bound))
    detail = "; ".join(f"p={p:g}: gap {gap:.4f} <= bound {b:.4f}" for p, gap, b in rows)
    return CheckResult(name="p-relaxation-bound", passed=passed, detail=detail,
                       data={"rows": rows, "lip_descent": lip_descent})


def check_viscosity_bound(n: int = 32, eps_values=(0.1, 0.01)) -> CheckResult:
    """Viscosity descent within eps/4 * circumference of the exact optimum."""
    grid = uniform_grid(n)
    f = RadialFunction(grid, np.ones(n))
    chi = half_circle_step_functional(grid)
    exact = relax.solve_lip1_exact_small(chi, f)
    passed = True
    rows = []
    for eps in eps_values:
        sol = relax.solve_viscosity(chi, f, eps)
        excess = sol.descent - exact.descent
        bound = eps / 4.0 * 2.0 * np.pi
        ok = -1e-10 <= excess <= bound
        ok &= np.abs(sol.g.slopes()).max() <= 1.0 + 1e-10
        passed &= ok
        rows.append((eps, excess, bound))
    detail = "; ".join(f"eps={e:g}: excess {x:.3e} in [0, {b:.3e}]"
                       for e, x, b in rows)
    return CheckResult(name="viscosity-bound", passed=passed, detail=detail,
                       data={"rows": rows, "exact_descent": exact.descent})


def check_structural(seed: int) -> CheckResult:
    """Every emitted direction is feasible: Lipschitz-1, weighted zero mean,
    converged marginal residuals."""
    rng = np.random.default_rng(seed)
    issues = []
    for n in (16, 48, 128):
        grid = uniform_grid(n)
        f = RadialFunction(grid, np.abs(rng.uniform(0.8, 2.0, n)))
        f = RadialFunction(grid, f.values)
        coeffs = rng.standard_normal(n)
        functional = nodal_restriction(
            BalancedMeasurePair(
                AtomicMeasure(grid.nodes[coeffs > 0], coeffs[coeffs > 0]),
                AtomicMeasure(grid.nodes[coeffs < 0], -coeffs[coeffs < 0]),
                float(coeffs[coeffs > 0].sum()), 0.0, False), grid)
        pair = balance_and_split(functional, weighted_mass_vector(f))
        result = transport.sinkhorn_eps_scaling(pair.mu, pair.nu, eps_min=1e-6)
        if max(result.plan.residual_row, result.plan.residual_col) > 1e-9:
            issues.append(f"n={n}: residual above 1e-9")
        g, predicted = transport.descent_direction(pair, f, eps=1e-6)
        if not lipschitz_feasible(g):
            issues.append(f"n={n}: direction not Lipschitz-1")
        w = weighted_mass_vector(f)
        if abs(float(w @ g.values)) > 1e-10:
            issues.append(f"n={n}: weighted mean not zero")
        if abs(lipschitz_seminorm(g) - 1.0) > 1e-10:
            issues.append(f"n={n}: seminorm not normalized")
        if predicted > 0.0:
            issues.append(f"n={n}: positive predicted descent")
    return CheckResult(name="structural-invariants", passed=not issues,
                       detail="; ".join(issues) if issues else "all directions feasible",
                       data={"issues": issues})


def oracle_report(seed: int = 20240801) -> list[CheckResult]:
    return [
        check_duality(seed),
        check_gradient_consistency(seed + 1),
        check_p_bound(),
        check_viscosity_bound(),
        check_structural(seed + 2),
    ]
