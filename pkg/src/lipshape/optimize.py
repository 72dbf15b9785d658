"""Outer optimization loop: descent direction, Armijo search, area projection.

Each step assembles the discrete shape derivative, balances it against the
first-order area constraint, produces a Lipschitz-1 descent direction by the
configured method, backtracks over dyadic steps with a positivity safeguard,
and rescales the radial function back to the target area.  The Armijo test
uses unprojected trial energies; both pre- and post-projection energies are
logged.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import relax, transport
from .circle import (
    P1Function,
    RadialFunction,
    lipschitz_seminorm,
    star_area,
    weighted_mass_vector,
)
from .measures import apply, balance_and_split
from .shapederiv import EnergySpec, assemble_derivative, energy

METHODS = ("hilbertian-p2", "plaplace", "sinkhorn")


class LineSearchFailure(RuntimeError):
    """No admissible Armijo step down to the smallest trial."""


@dataclass
class OptimizerConfig:
    method: str = "sinkhorn"
    gamma: float = 1e-3
    max_step: float = 0.5
    max_steps: int = 50
    target_area: float = 4.0 * np.pi
    rings: int = 16
    p: float = 4.0
    sinkhorn_eps: float | None = None
    sinkhorn_tol: float = 1e-9
    newton_tol: float | None = None
    min_step_exponent: int = 30
    positivity_floor_frac: float = 1e-6
    armijo_on_projected: bool = False
    stationarity_rtol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.max_step < 1.0:
            raise ValueError("max_step must lie in (0, 1)")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass
class IterateRecord:
    step: int
    energy: float
    predicted: float
    step_size: float
    energy_trial: float
    energy_projected: float
    area: float
    lipschitz: float
    wall_time: float


@dataclass
class IterateLog:
    records: list[IterateRecord] = field(default_factory=list)
    status: str = "running"
    final_energy: float = np.nan

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def rows(self):
        for r in self.records:
            yield (r.step, r.energy, r.energy_trial, r.energy_projected,
                   r.predicted, r.step_size, r.area, r.lipschitz, r.wall_time)

    row_header = ("step", "energy", "energy_trial", "energy_projected",
                  "predicted", "step_size", "area", "lipschitz", "wall_time")


def project_area(f: RadialFunction, target: float) -> RadialFunction:
    """Rescale to the target area; exact since area is quadratic in f."""
    area = star_area(f)
    if area <= 0.0:
        raise ValueError("cannot project a degenerate domain")
    return RadialFunction(f.grid, f.values * np.sqrt(target / area))


def normalize_direction(g: P1Function) -> P1Function:
    seminorm = lipschitz_seminorm(g)
    if seminorm <= 0.0:
        raise ValueError("cannot normalize a constant direction")
    return P1Function(g.grid, g.values / seminorm)


def descent_by_method(functional, f: RadialFunction, config: OptimizerConfig):
    """Direction of the configured method, normalized to Lipschitz constant 1.

    Returns (g, predicted) with predicted the functional applied to g, or
    None when the balanced measure is stationary.
    """
    w = weighted_mass_vector(f)
    pair = balance_and_split(functional, w)
    if pair.stationary or pair.beta <= config.stationarity_rtol * max(
            1e-300, functional.total_variation):
        return None
    if config.method == "sinkhorn":
        try:
            return transport.descent_direction(
                pair, f, eps=config.sinkhorn_eps, tol=config.sinkhorn_tol)
        except transport.StationaryPairError:
            return None
    p = 2.0 if config.method == "hilbertian-p2" else config.p
    solution = relax.solve_plaplace(functional, f, p, tol=config.newton_tol)
    g = normalize_direction(solution.g)
    return g, apply(functional, g)


def _armijo(f: RadialFunction, g: P1Function, predicted: float,
            evaluate, config: OptimizerConfig, J0: float | None = None):
    """Backtracking over dyadic steps with a strict positivity safeguard.

    Returns (step, trial values, trial energy) or None when no admissible
    step exists down to 2^-min_step_exponent.
    """
    if not predicted < 0.0:
        raise ValueError(f"Armijo needs a descent direction, predicted {predicted:g}")
    if J0 is None:
        J0 = evaluate(f)
    floor = config.positivity_floor_frac * float(f.values.mean())
    s = config.max_step
    for _ in range(config.min_step_exponent):
        trial = f.values + s * g.values
        if trial.min() > floor:
            f_trial = RadialFunction(f.grid, trial)
            J_trial = evaluate(f_trial)
            if J_trial - J0 <= config.gamma * s * predicted:
                return s, f_trial, J_trial, J0
        s *= 0.5
    return None


def armijo_step(f: RadialFunction, g: P1Function, predicted: float,
                spec: EnergySpec, config: OptimizerConfig):
    """Single accepted step followed by the area projection.

    Returns (step, projected iterate, trial energy) or raises
    LineSearchFailure when every admissible step is rejected.
    """
    result = _armijo(f, g, predicted, lambda fr: energy(fr, spec, config.rings), config)
    if result is None:
        raise LineSearchFailure("no admissible Armijo step")
    s, f_trial, J_trial, _ = result
    return s, project_area(f_trial, config.target_area), J_trial


def run(f0: RadialFunction, spec: EnergySpec, config: OptimizerConfig,
        on_step=None) -> IterateLog:
    """Full descent loop from an initial radial function.

    The initial iterate is projected to the target area so the area invariant
    holds from step zero.  Terminates on the step budget, stationarity of the
    balanced measure, or line-search failure; always returns the accumulated
    log with a terminal status.  on_step, when given, is called with
    (step index, accepted projected iterate) after every accepted step.
    """
    log = IterateLog()
    f = project_area(f0, config.target_area)
    evaluate = lambda fr: energy(fr, spec, config.rings)
    J_curr = evaluate(f)
    for step in range(config.max_steps):
        t0 = time.perf_counter()
        functional = assemble_derivative(f, spec, config.rings)
        direction = descent_by_method(functional, f, config)
        if direction is None:
            log.status = "stationary"
            break
        g, predicted = direction
        if not predicted < 0.0:
            log.status = "stationary"
            break
        result = _armijo(f, g, predicted, evaluate, config, J0=J_curr)
        if result is None:
            log.status = "line-search-failure"
            break
        s, f_trial, J_trial, _ = result
        f = project_area(f_trial, config.target_area)
        J_next = evaluate(f)
        log.records.append(IterateRecord(
            step=step, energy=J_curr, predicted=predicted, step_size=s,
            energy_trial=J_trial, energy_projected=J_next,
            area=star_area(f), lipschitz=lipschitz_seminorm(g),
            wall_time=time.perf_counter() - t0))
        if on_step is not None:
            on_step(step, f)
        J_curr = J_next
    else:
        log.status = "max-steps"
    log.final_energy = J_curr
    return log
