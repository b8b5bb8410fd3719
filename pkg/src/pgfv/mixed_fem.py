"""Mixed RT0 / P0 solver for ``-div grad u = f`` with ``u = 0`` on the boundary,
flux recovery from cell means, and the two-point finite-volume baseline.

Edge unknowns are total fluxes ``int_a grad u . n`` oriented by the edge
normal. Cell balances read ``sum_a s_Ka p_a = -F_K`` with ``F_K = int_K f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components

from . import quadrature as quad
from .errors import MeshAdmissibilityError
from .linalg import DEFAULT_TOL, csr_from_triplets, solve_general, solve_spd
from .mesh import Mesh
from .rt0 import assemble_div, assemble_mass

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]

DISTANCE_RULES = ("centroid-normal", "circumcenter")


@dataclass
class DiscreteSolution:
    u: np.ndarray  # one value per triangle
    p: np.ndarray  # total flux per edge
    scheme: str = ""
    info: dict | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.p))):
            raise ValueError("solution contains non-finite values")


def cell_integrals(mesh: Mesh, f: ScalarField | None) -> np.ndarray:
    """``F_K = int_K f`` with the edge-midpoint rule; zeros for ``f=None``."""
    if f is None:
        return np.zeros(mesh.n_triangles)
    pts = quad.map_points(mesh.vertices[mesh.triangles], quad.MIDPOINT3_POINTS)
    vals = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, pts.shape[:2])
    return mesh.areas * (vals @ quad.MIDPOINT3_WEIGHTS)


def balance_residual(mesh: Mesh, p, F) -> np.ndarray:
    """Per-cell ``sum_a s_Ka p_a + F_K``."""
    p = np.asarray(p, dtype=float)
    return (mesh.tri_signs * p[mesh.tri_edges]).sum(axis=1) + F


def solve_mixed(mesh: Mesh, f: ScalarField | None, tol: float = DEFAULT_TOL) -> DiscreteSolution:
    """Solve ``[M B^T; B 0] [p; u] = [0; -F]`` with a sparse LU."""
    m = assemble_mass(mesh)
    b = assemble_div(mesh)
    F = cell_integrals(mesh, f)
    saddle = sps.bmat([[m, b.T], [b, None]], format="csr")
    rhs = np.concatenate([np.zeros(mesh.n_edges), -F])
    if not np.any(F):
        x = np.zeros(len(rhs))
    else:
        x = solve_general(saddle, rhs, tol)
    return DiscreteSolution(u=x[mesh.n_edges :], p=x[: mesh.n_edges], scheme="mixed")


def recover_flux_from_means(mesh: Mesh, m, b, u, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Edge fluxes ``p = -M^{-1} B^T u``.

    ``M^{-1}`` is dense, so every flux depends on every cell mean; the
    recovery costs a global SPD solve.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_triangles,):
        raise ValueError(f"expected {mesh.n_triangles} cell values, got {u.shape}")
    return -solve_spd(m, b.T @ u, tol)


def circumcenters(mesh: Mesh) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    ab, ac = b - a, c - a
    d = 2.0 * (ab[:, 0] * ac[:, 1] - ab[:, 1] * ac[:, 0])
    ab2 = (ab**2).sum(axis=1)
    ac2 = (ac**2).sum(axis=1)
    ux = (ac[:, 1] * ab2 - ab[:, 1] * ac2) / d
    uy = (ab[:, 0] * ac2 - ac[:, 0] * ab2) / d
    return a + np.stack([ux, uy], axis=1)


def two_point_distances(
    mesh: Mesh, rule: str = "centroid-normal", allow_coincident: bool = False
) -> np.ndarray:
    """Distance ``d_a`` of the two-point flux ``|a| (u_L - u_K) / d_a``.

    ``centroid-normal`` projects the centroid offset on the normal;
    ``circumcenter`` takes the signed distance between circumcenters. On the
    boundary the missing cell point is the edge midpoint (signed distance
    along the outward normal).

    With ``allow_coincident``, interior edges whose two circumcenters coincide
    get ``d_a = 0`` instead of an error.

    Raises:
        MeshAdmissibilityError: for the first edge with ``d_a <= 0``.
    """
    if rule == "centroid-normal":
        centers = mesh.centroids
    elif rule == "circumcenter":
        centers = circumcenters(mesh)
    else:
        raise ValueError(f"unknown distance rule {rule!r}; use one of {DISTANCE_RULES}")
    k, l = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    inner = l >= 0
    far = mesh.midpoints.copy()
    far[inner] = centers[l[inner]]
    # Circumcenters of K and L both lie on the bisector of the edge, so the
    # projection is their signed distance; it is negative across a
    # non-Delaunay edge.
    d = ((far - centers[k]) * mesh.normals).sum(axis=1)
    small = d <= 1e-12 * mesh.lengths
    if allow_coincident and rule == "circumcenter":
        coincident = inner & (np.abs(d) <= 1e-12 * mesh.lengths)
        d[coincident] = 0.0
        small &= ~coincident
    bad = np.flatnonzero(small)
    if bad.size:
        raise MeshAdmissibilityError(int(bad[0]), float(d[bad[0]]), rule)
    return d


def two_point_coefficients(mesh: Mesh, distances) -> np.ndarray:
    """Transmissibilities ``|a| / d_a``."""
    return mesh.lengths / np.asarray(distances)


def two_point_flux_entries(mesh: Mesh, edges, trans):
    """Cell coefficients of the two-point flux of each edge.

    Returns a list of ``(cells, coefficients)`` pairs so that
    ``F_a(u) = coefficients . u[cells]``.
    """
    out = []
    for e in edges:
        k, l = mesh.edge_cells[e]
        t = trans[e]
        if l >= 0:
            out.append((np.array([l, k]), np.array([t, -t])))
        else:
            out.append((np.array([k]), np.array([-t])))
    return out


def assemble_balance(mesh: Mesh, flux_entries) -> sps.csr_matrix:
    """Cell-balance matrix from per-edge flux coefficient lists.

    Row ``K`` accumulates ``s_Ka`` times the coefficients of every edge of
    ``K``: ``+`` into the left cell, ``-`` into the right cell.
    """
    rows, cols, vals = [], [], []
    for e, (cells, coeffs) in enumerate(flux_entries):
        k, l = mesh.edge_cells[e]
        rows.append(np.full(len(cells), k))
        cols.append(cells)
        vals.append(coeffs)
        if l >= 0:
            rows.append(np.full(len(cells), l))
            cols.append(cells)
            vals.append(-np.asarray(coeffs))
    shape = (mesh.n_triangles, mesh.n_triangles)
    return csr_from_triplets(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), shape
    )


def evaluate_fluxes(flux_entries, u) -> np.ndarray:
    return np.array([coeffs @ u[cells] for cells, coeffs in flux_entries])


def assemble_two_point(mesh: Mesh, f: ScalarField | None, distance_rule: str = "centroid-normal"):
    """Balance matrix ``A`` and right-hand side ``-F`` of the two-point scheme."""
    trans = two_point_coefficients(mesh, two_point_distances(mesh, distance_rule))
    entries = two_point_flux_entries(mesh, range(mesh.n_edges), trans)
    return assemble_balance(mesh, entries), -cell_integrals(mesh, f), entries


def solve_two_point_fv(
    mesh: Mesh,
    f: ScalarField | None,
    distance_rule: str = "centroid-normal",
    tol: float = DEFAULT_TOL,
) -> DiscreteSolution:
    """Two-point finite volumes; the balance matrix is negated into an SPD system.

    Under the circumcenter rule, an interior edge whose two circumcenters
    coincide has unbounded transmissibility: its two cells are merged into
    one unknown, and the flux through it is recovered afterwards from the
    cell balances.
    """
    d = two_point_distances(mesh, distance_rule, allow_coincident=True)
    coincident = d == 0.0
    trans = np.where(coincident, 0.0, mesh.lengths / np.where(coincident, 1.0, d))
    entries = two_point_flux_entries(mesh, range(mesh.n_edges), trans)
    a = assemble_balance(mesh, entries)
    F = cell_integrals(mesh, f)
    info = {"distance_rule": distance_rule, "merged_edges": int(coincident.sum())}

    if not coincident.any():
        u = solve_spd(-a, F, tol)
        return DiscreteSolution(u=u, p=evaluate_fluxes(entries, u), scheme="twopoint", info=info)

    merged = np.flatnonzero(coincident)
    k, l = mesh.edge_cells[merged, 0], mesh.edge_cells[merged, 1]
    links = sps.coo_matrix(
        (np.ones(len(merged)), (k, l)), shape=(mesh.n_triangles,) * 2
    )
    n_groups, group = connected_components(links, directed=False)
    agg = sps.csr_matrix(
        (np.ones(mesh.n_triangles), (np.arange(mesh.n_triangles), group)),
        shape=(mesh.n_triangles, n_groups),
    )
    ug = solve_spd((agg.T @ (-a) @ agg).tocsr(), agg.T @ F, tol)
    u = agg @ ug
    p = evaluate_fluxes(entries, u)

    # Fluxes through merged edges close each cell balance exactly.
    residual = balance_residual(mesh, p, F)
    edge_group = group[mesh.edge_cells[merged, 0]]
    for g in np.unique(edge_group):
        edges = merged[edge_group == g]
        cells = np.flatnonzero(group == g)
        row = {c: i for i, c in enumerate(cells)}
        closure = np.zeros((len(cells), len(edges)))
        for j, e in enumerate(edges):
            closure[row[mesh.edge_cells[e, 0]], j] = 1.0
            closure[row[mesh.edge_cells[e, 1]], j] = -1.0
        p[edges] = np.linalg.lstsq(closure, -residual[cells], rcond=None)[0]
    info["groups"] = int(n_groups)
    return DiscreteSolution(u=u, p=p, scheme="twopoint", info=info)
