"""Periodic P1 finite elements on the unit circle.

The circle carries the intrinsic (arc-length) metric, so the Lipschitz
seminorm of a piecewise-linear function equals its maximal absolute slope.
Grids are arbitrary sorted angle divisions; all integrals of products of two
P1 functions are evaluated exactly per arc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Radial functions below this nodal value describe a domain collapsing onto
# the origin; the radial map degenerates there.
MIN_RADIUS = 1e-10


class GridError(ValueError):
    """Invalid circle grid or grid/function mismatch."""


class InterpolationError(ValueError):
    """Non-finite data encountered during nodal interpolation."""


def reduce_angle(theta):
    """Reduce angles to [0, 2*pi)."""
    return np.asarray(theta, dtype=float) % TWO_PI


@dataclass(frozen=True, eq=False)
class CircleGrid:
    """Sorted division of the circle into arcs.

    nodes: strictly increasing angles in [0, 2*pi), at least 3 of them.
    The last arc wraps through 2*pi back to the first node.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise GridError("a circle grid needs at least 3 nodes")
        if np.any(nodes < 0.0) or np.any(nodes >= TWO_PI):
            raise GridError("grid nodes must lie in [0, 2*pi)")
        if np.any(np.diff(nodes) <= 0.0):
            raise GridError("grid nodes must be strictly increasing")
        arcs = np.diff(nodes, append=nodes[0] + TWO_PI)
        if np.any(arcs <= 0.0):
            raise GridError("all arcs must have positive length")
        if abs(arcs.sum() - TWO_PI) > 1e-12:
            raise GridError("arc lengths must sum to 2*pi")
        nodes = nodes.copy()
        nodes.flags.writeable = False
        arcs.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", arcs)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def max_arc(self) -> float:
        return float(self.arcs.max())

    def locate(self, theta):
        """Bracket angles: return (arc index k, local coordinate t in [0,1)).

        theta is reduced modulo 2*pi; the wrap-around arc is handled here and
        nowhere else.
        """
        th = reduce_angle(theta)
        k = np.searchsorted(self.nodes, th, side="right") - 1
        k = np.where(k < 0, self.n - 1, k)
        offset = (th - self.nodes[k]) % TWO_PI
        t = offset / self.arcs[k]
        return k, t


def grids_compatible(a: CircleGrid, b: CircleGrid) -> bool:
    return a is b or (a.n == b.n and np.array_equal(a.nodes, b.nodes))


def uniform_grid(n: int) -> CircleGrid:
    """Equispaced grid with nodes 2*pi*i/n."""
    if n < 3:
        raise GridError(f"uniform grid needs n >= 3, got {n}")
    return CircleGrid(TWO_PI * np.arange(n) / n)


def geodesic_distance(theta_a, theta_b):
    """Intrinsic metric on the circle: shorter of the two arcs, always <= pi."""
    d = np.abs(np.asarray(theta_a, dtype=float) - np.asarray(theta_b, dtype=float)) % TWO_PI
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True, eq=False)
class P1Function:
    """Continuous piecewise-linear function given by nodal values."""

    grid: CircleGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise GridError("one nodal value per grid node required")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __call__(self, theta):
        k, t = self.grid.locate(theta)
        nxt = (k + 1) % self.grid.n
        return (1.0 - t) * self.values[k] + t * self.values[nxt]

    def slopes(self) -> np.ndarray:
        """Per-arc slopes (value difference over arc length)."""
        dv = np.diff(self.values, append=self.values[0])
        return dv / self.grid.arcs


@dataclass(frozen=True, eq=False)
class RadialFunction(P1Function):
    """Strictly positive P1 function; encodes a star-shaped planar domain."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("radial function values must be finite")
        if self.values.min() < MIN_RADIUS:
            raise ValueError(
                f"radial function must stay >= {MIN_RADIUS:g}, "
                f"got min {self.values.min():g}"
            )


def lipschitz_seminorm(g: P1Function) -> float:
    """Largest absolute slope; equals the intrinsic-metric Lipschitz constant."""
    return float(np.abs(g.slopes()).max())


def interpolate(fn, grid: CircleGrid) -> P1Function:
    """Nodal (Lagrange) interpolation of a scalar function of the angle."""
    values = np.asarray(fn(grid.nodes), dtype=float)
    values = np.broadcast_to(values, (grid.n,)).astype(float)
    if not np.all(np.isfinite(values)):
        raise InterpolationError("function is not finite at all grid nodes")
    return P1Function(grid, values)


def weighted_mass_vector(f: RadialFunction) -> np.ndarray:
    """Vector w with w_i = integral of f * hat_i, exact for P1 data.

    For any P1 function g on the same grid, dot(w, g.values) equals the exact
    integral of f*g over the circle.
    """
    fv = f.values
    fn = np.roll(fv, -1)
    h = f.grid.arcs
    # arc (i, i+1) contributes h*(f_i/3 + f_{i+1}/6) to node i and
    # h*(f_i/6 + f_{i+1}/3) to node i+1 (exact mass-matrix row)
    left = h * (fv / 3.0 + fn / 6.0)
    right = h * (fv / 6.0 + fn / 3.0)
    return left + np.roll(right, 1)


def star_area(f: RadialFunction) -> float:
    """Area of the star-shaped domain: half the exact integral of f^2."""
    fv = f.values
    fn = np.roll(fv, -1)
    h = f.grid.arcs
    return float(0.5 * np.sum(h * (fv * fv + fv * fn + fn * fn) / 3.0))


def square_radial(grid: CircleGrid, half_side: float = np.sqrt(np.pi)) -> RadialFunction:
    """Radial function of the axis-aligned square (-a, a)^2, sampled at nodes."""
    th = grid.nodes
    denom = np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))
    return RadialFunction(grid, half_side / denom)
