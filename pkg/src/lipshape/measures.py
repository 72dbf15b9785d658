"""Discrete shape derivatives as atomic signed measures on the circle.

A shape derivative tested against P1 functions is a vector of nodal
coefficients, i.e. an atomic measure sitting on the grid nodes.  Balancing it
with the multiplier of the first-order area constraint splits it into a
positive/negative pair of equal mass, the transport data of the steepest
descent problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circle import CircleGrid, P1Function, grids_compatible, reduce_angle

# Relative mass below which a balanced pair counts as stationary.
STATIONARY_RTOL = 1e-12


class CompatibilityError(ValueError):
    """Functional and test function live on different grids."""


class DegenerateDomainError(ValueError):
    """Weight vector with non-positive total mass."""


@dataclass(frozen=True, eq=False)
class NodalFunctional:
    """Linear functional g -> sum_i a_i g(theta_i) on P1 functions."""

    grid: CircleGrid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.grid.n,):
            raise CompatibilityError("one coefficient per grid node required")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("functional coefficients must be finite")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.coeffs).sum())


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Positive atoms at arbitrary angles (not restricted to grid nodes)."""

    angles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        angles = reduce_angle(self.angles)
        weights = np.asarray(self.weights, dtype=float)
        if angles.shape != weights.shape or angles.ndim != 1:
            raise ValueError("angles and weights must be matching 1d arrays")
        if angles.size and weights.min() <= 0.0:
            raise ValueError("atom weights must be strictly positive")
        angles = angles.copy()
        weights = weights.copy()
        angles.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "weights", weights)

    @property
    def n_atoms(self) -> int:
        return self.angles.size

    @property
    def mass(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True, eq=False)
class BalancedMeasurePair:
    """Positive/negative parts of a balanced measure with common mass beta."""

    mu: AtomicMeasure
    nu: AtomicMeasure
    beta: float
    lambda_star: float
    stationary: bool


def apply(functional, g: P1Function) -> float:
    """Evaluate a NodalFunctional or AtomicMeasure on a P1 function.

    Off-node atoms are evaluated by P1 interpolation.
    """
    if isinstance(functional, NodalFunctional):
        if not grids_compatible(functional.grid, g.grid):
            raise CompatibilityError("functional and function grids differ")
        return float(functional.coeffs @ g.values)
    if isinstance(functional, AtomicMeasure):
        if functional.n_atoms == 0:
            return 0.0
        return float(functional.weights @ g(functional.angles))
    raise TypeError(f"cannot apply object of type {type(functional).__name__}")


def pair_apply(pair: BalancedMeasurePair, g: P1Function) -> float:
    """Evaluate mu - nu on a P1 function."""
    return apply(pair.mu, g) - apply(pair.nu, g)


def lambda_star(functional: NodalFunctional, w: np.ndarray) -> float:
    """Multiplier balancing the functional against the constraint weights."""
    w = np.asarray(w, dtype=float)
    total = w.sum()
    if total <= 0.0:
        raise DegenerateDomainError("constraint weight vector has no mass")
    return float(functional.coeffs.sum() / total)


def balance_and_split(functional: NodalFunctional, w: np.ndarray) -> BalancedMeasurePair:
    """Subtract lambda_star * w and split into positive/negative atom sets.

    The roundoff residual of the balanced coefficients is removed uniformly so
    that symmetric inputs stay symmetric.  A vanishing mass is a stationary
    point, reported through the pair's flag rather than as an error.
    """
    w = np.asarray(w, dtype=float)
    lam = lambda_star(functional, w)
    m = functional.coeffs - lam * w
    m = m - m.sum() / m.size
    pos = m > 0.0
    neg = m < 0.0
    nodes = functional.grid.nodes
    mu = AtomicMeasure(nodes[pos], m[pos])
    nu = AtomicMeasure(nodes[neg], -m[neg])
    beta = mu.mass
    stationary = beta <= STATIONARY_RTOL * max(1e-300, functional.total_variation)
    return BalancedMeasurePair(mu=mu, nu=nu, beta=beta, lambda_star=lam, stationary=stationary)


def nodal_restriction(pair: BalancedMeasurePair, grid: CircleGrid) -> NodalFunctional:
    """Restrict mu - nu to the grid: coefficients a_i = (mu - nu) applied to hat_i.

    Each atom's weight is split linearly onto its bracketing nodes, so the
    restricted functional agrees with the atomic pair on every P1 function.
    """
    coeffs = np.zeros(grid.n)
    for measure, sign in ((pair.mu, 1.0), (pair.nu, -1.0)):
        if measure.n_atoms == 0:
            continue
        k, t = grid.locate(measure.angles)
        np.add.at(coeffs, k, sign * measure.weights * (1.0 - t))
        np.add.at(coeffs, (k + 1) % grid.n, sign * measure.weights * t)
    return NodalFunctional(grid, coeffs)


def manufactured_atoms(n_pairs: int = 3, offset: float = 0.05) -> BalancedMeasurePair:
    """Antipodal unit-atom pairs: +1 at offset+i, -1 at pi+offset+i, i < n_pairs.

    Already balanced, so the multiplier is zero and beta equals n_pairs.
    """
    base = offset + np.arange(n_pairs, dtype=float)
    mu = AtomicMeasure(base, np.ones(n_pairs))
    nu = AtomicMeasure(np.pi + base, np.ones(n_pairs))
    return BalancedMeasurePair(mu=mu, nu=nu, beta=float(n_pairs), lambda_star=0.0,
                               stationary=n_pairs == 0)


def half_circle_step_functional(grid: CircleGrid, amplitude: float = 0.1) -> NodalFunctional:
    """Nodal coefficients of the density +amplitude on [0, pi), -amplitude on [pi, 2*pi).

    Coefficients are the exact integrals of the step density against the hat
    functions, with arcs split at the density's jump angles.
    """

    def hat_moments(t0, t1):
        # integrals of (1-t) and t over [t0, t1] in local coordinates
        m_left = (t1 - t0) - 0.5 * (t1 * t1 - t0 * t0)
        m_right = 0.5 * (t1 * t1 - t0 * t0)
        return m_left, m_right

    n = grid.n
    coeffs = np.zeros(n)
    jumps = (0.0, np.pi, 2.0 * np.pi)
    for i in range(n):
        a = grid.nodes[i]
        h = grid.arcs[i]
        # split the arc [a, a+h] at density jumps (unwrapped past 2*pi)
        cuts = [a, a + h]
        for j in jumps:
            for shift in (0.0, 2.0 * np.pi):
                c = j + shift
                if a < c < a + h:
                    cuts.append(c)
        cuts = sorted(set(cuts))
        for s0, s1 in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (s0 + s1) % (2.0 * np.pi)
            dens = amplitude if mid < np.pi else -amplitude
            m_left, m_right = hat_moments((s0 - a) / h, (s1 - a) / h)
            coeffs[i] += dens * h * m_left
            coeffs[(i + 1) % n] += dens * h * m_right
    return NodalFunctional(grid, coeffs)
