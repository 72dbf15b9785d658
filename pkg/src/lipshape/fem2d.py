"""Triangulated star-shaped domains and P1 Poisson solves.

A fixed structured triangulation of the unit disk (concentric rings, six
sectors) is pushed forward through the radial map of a positive P1 function
on the circle; its boundary vertices coincide with the circle-grid nodes.
State and adjoint problems are P1 Galerkin solves with homogeneous Dirichlet
data; sources and energies use the three-point edge-midpoint rule, exact for
quadratics.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .circle import TWO_PI, CircleGrid, RadialFunction

SOLVER_RTOL = 1e-12


class MeshError(ValueError):
    """Degenerate or incompatible mesh."""


class SolverError(RuntimeError):
    """Linear solve failed to meet the residual contract."""


@dataclass(frozen=True, eq=False)
class DiskMesh:
    """Conforming triangle mesh of a star-shaped domain.

    vertices: (nv, 2) coordinates; triangles: (nt, 3) positively oriented
    vertex triples; boundary_nodes: boundary vertex indices ordered by angle,
    matching the circle grid; ref_vertices / ref_angles / ref_radii: the
    unit-disk preimage (angles are exact by construction, the center has
    radius 0).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    ref_vertices: np.ndarray
    ref_angles: np.ndarray
    ref_radii: np.ndarray
    grid: CircleGrid | None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


@dataclass(frozen=True, eq=False)
class FemField:
    """Scalar nodal field on a disk mesh."""

    mesh: DiskMesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_vertices,):
            raise MeshError("one value per mesh vertex required")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)


def _ring_offset(k: int) -> int:
    # center plus 6*1 + ... + 6*(k-1) vertices before ring k
    return 1 + 3 * k * (k - 1)


@lru_cache(maxsize=8)
def reference_disk_mesh(rings: int) -> DiskMesh:
    """Structured unit-disk mesh: ring k carries 6k vertices at radius k/rings.

    Deterministic for a given ring count; the boundary ring has 6*rings
    vertices whose angles form the associated circle grid.
    """
    if rings < 2:
        raise MeshError(f"need at least 2 rings, got {rings}")
    angles = [0.0]
    radii = [0.0]
    for k in range(1, rings + 1):
        m = 6 * k
        angles.extend(TWO_PI * np.arange(m) / m)
        radii.extend(np.full(m, k / rings))
    ref_angles = np.asarray(angles)
    ref_radii = np.asarray(radii)
    vertices = np.column_stack([ref_radii * np.cos(ref_angles),
                                ref_radii * np.sin(ref_angles)])

    triangles = []
    for s in range(6):  # innermost fan around the center
        o = _ring_offset(1)
        triangles.append((0, o + s, o + (s + 1) % 6))
    for k in range(2, rings + 1):
        o_in, m_in = _ring_offset(k - 1), 6 * (k - 1)
        o_out, m_out = _ring_offset(k), 6 * k
        for s in range(6):
            inner = [o_in + ((k - 1) * s + t) % m_in for t in range(k)]
            outer = [o_out + (k * s + t) % m_out for t in range(k + 1)]
            for t in range(k):
                triangles.append((outer[t], outer[t + 1], inner[min(t, k - 1)]))
            for t in range(k - 1):
                triangles.append((inner[t], inner[t + 1], outer[t + 1]))
    triangles = np.asarray(triangles, dtype=int)

    # enforce positive orientation
    v = vertices[triangles]
    cross = _cross_z(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = cross < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    boundary = np.arange(_ring_offset(rings), _ring_offset(rings) + 6 * rings)
    grid = CircleGrid(ref_angles[boundary])
    mesh = DiskMesh(vertices=vertices, triangles=triangles, boundary_nodes=boundary,
                    ref_vertices=vertices, ref_angles=ref_angles,
                    ref_radii=ref_radii, grid=grid)
    if triangle_areas(mesh).min() <= 0.0:
        raise MeshError("reference mesh has a non-positive triangle")
    return mesh


def map_mesh(ref: DiskMesh, f: RadialFunction) -> DiskMesh:
    """Push the reference mesh through the radial map of f.

    Boundary vertices land exactly at radius f_i in direction theta_i; any
    non-positive mapped triangle area is rejected as a degenerate map.
    """
    if not np.array_equal(f.grid.nodes, ref.ref_angles[ref.boundary_nodes]):
        raise MeshError("radial function grid does not match the boundary ring")
    radial = np.asarray(f(ref.ref_angles), dtype=float)
    scaled = ref.ref_radii * radial
    vertices = np.column_stack([scaled * np.cos(ref.ref_angles),
                                scaled * np.sin(ref.ref_angles)])
    mesh = DiskMesh(vertices=vertices, triangles=ref.triangles,
                    boundary_nodes=ref.boundary_nodes, ref_vertices=ref.ref_vertices,
                    ref_angles=ref.ref_angles, ref_radii=ref.ref_radii, grid=f.grid)
    if triangle_areas(mesh).min() <= 0.0:
        raise MeshError("radial map produced a degenerate triangle")
    return mesh


def _cross_z(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def triangle_areas(mesh: DiskMesh) -> np.ndarray:
    v = mesh.vertices[mesh.triangles]
    return 0.5 * _cross_z(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])


def element_data(mesh: DiskMesh):
    """Per-element geometry: areas, P1 basis gradients, edge midpoints.

    grads[t, a] is the gradient of the hat function of local vertex a;
    midpoints[t, q] is the midpoint of the edge opposite local vertex q.
    Cached on the (immutable) mesh.
    """
    cached = mesh.__dict__.get("_element_data")
    if cached is not None:
        return cached
    v = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    areas = 0.5 * _cross_z(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    x, y = v[..., 0], v[..., 1]
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    b = y[:, nxt] - y[:, prv]
    c = x[:, prv] - x[:, nxt]
    grads = np.stack([b, c], axis=-1) / (2.0 * areas)[:, None, None]
    midpoints = 0.5 * (v[:, nxt] + v[:, prv])
    mesh.__dict__["_element_data"] = (areas, grads, midpoints)
    return areas, grads, midpoints


def mesh_area(mesh: DiskMesh) -> float:
    return float(triangle_areas(mesh).sum())


def min_triangle_angle(mesh: DiskMesh) -> float:
    """Smallest interior angle over the mesh, in degrees."""
    v = mesh.vertices[mesh.triangles]
    angles = []
    for a in range(3):
        e1 = v[:, (a + 1) % 3] - v[:, a]
        e2 = v[:, (a + 2) % 3] - v[:, a]
        cosang = np.sum(e1 * e2, axis=1) / (
            np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
        angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return float(np.degrees(np.min(angles)))


def _stiffness(mesh: DiskMesh) -> sp.csr_matrix:
    areas, grads, _ = element_data(mesh)
    nt = mesh.n_triangles
    local = np.einsum("tad,tbd,t->tab", grads, grads, areas)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    A = sp.csr_matrix((local.ravel(), (rows, cols)),
                      shape=(mesh.n_vertices, mesh.n_vertices))
    return A


def _midpoint_load(mesh: DiskMesh, density: np.ndarray) -> np.ndarray:
    """Assemble integral of density * hat_i with the 3-point midpoint rule.

    density has shape (nt, 3): values at the edge midpoints.  The hat of
    local vertex a is 1/2 on the two adjacent midpoints and 0 opposite.
    """
    areas, _, _ = element_data(mesh)
    total = density.sum(axis=1)
    local = (areas / 6.0)[:, None] * (total[:, None] - density)
    load = np.zeros(mesh.n_vertices)
    np.add.at(load, mesh.triangles.ravel(), local.ravel())
    return load


def _dirichlet_solve(mesh: DiskMesh, load: np.ndarray) -> FemField:
    A = _stiffness(mesh)
    interior = np.setdiff1d(np.arange(mesh.n_vertices), mesh.boundary_nodes,
                            assume_unique=True)
    A_ii = A[interior][:, interior].tocsc()
    b = load[interior]
    u_i = spsolve(A_ii, b)
    norm_b = np.linalg.norm(b)
    if norm_b > 0.0:
        residual = np.linalg.norm(A_ii @ u_i - b) / norm_b
        if residual > SOLVER_RTOL:
            raise SolverError(f"linear solve residual {residual:.3e} exceeds "
                              f"{SOLVER_RTOL:g}")
    values = np.zeros(mesh.n_vertices)
    values[interior] = u_i
    return FemField(mesh=mesh, values=values)


def field_at_midpoints(field: FemField) -> np.ndarray:
    """P1 field evaluated at the edge midpoints, shape (nt, 3)."""
    u = field.values[field.mesh.triangles]
    nxt = [1, 2, 0]
    prv = [2, 0, 1]
    return 0.5 * (u[:, nxt] + u[:, prv])


def solve_state(mesh: DiskMesh, F) -> FemField:
    """P1 Galerkin solution of -Laplace u = F with zero boundary values."""
    _, _, mids = element_data(mesh)
    f_mid = np.asarray(F(mids[..., 0], mids[..., 1]), dtype=float)
    f_mid = np.broadcast_to(f_mid, mids.shape[:2])
    return _dirichlet_solve(mesh, _midpoint_load(mesh, f_mid))


def solve_adjoint(mesh: DiskMesh, u: FemField, j_v) -> FemField:
    """P1 solution of the adjoint problem with source -j_v(x, u)."""
    _, _, mids = element_data(mesh)
    u_mid = field_at_midpoints(u)
    density = np.asarray(j_v(mids[..., 0], mids[..., 1], u_mid), dtype=float)
    density = np.broadcast_to(density, mids.shape[:2])
    return _dirichlet_solve(mesh, -_midpoint_load(mesh, density))


def integrate(mesh: DiskMesh, values_at_midpoints: np.ndarray) -> float:
    """Midpoint-rule integral of a quantity sampled at the edge midpoints."""
    areas, _, _ = element_data(mesh)
    return float(np.sum(areas / 3.0 * values_at_midpoints.sum(axis=1)))
