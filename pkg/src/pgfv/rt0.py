"""Lowest-order Raviart-Thomas basis on an oriented triangle mesh.

The basis function of edge ``a`` is ``(x - W) / (2|K|)`` on its left cell and
``-(x - E) / (2|L|)`` on its right cell, where ``W`` and ``E`` are the apexes
opposite ``a``. Its total normal flux through edge ``b`` is ``delta_ab``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps

from . import quadrature as quad
from .linalg import csr_from_triplets
from .mesh import Mesh


def _barycentric(corners, x):
    p0, p1, p2 = corners
    t = np.column_stack([p1 - p0, p2 - p0])
    l12 = np.linalg.solve(t, np.asarray(x, dtype=float) - p0)
    return np.array([1.0 - l12.sum(), l12[0], l12[1]])


def contains(mesh: Mesh, triangle: int, x, slack: float = 1e-12) -> bool:
    lam = _barycentric(mesh.vertices[mesh.triangles[triangle]], x)
    return bool(np.all(lam >= -slack))


def local_basis(mesh: Mesh, triangle: int, local: int, x) -> np.ndarray:
    """Piece of the basis function of local edge ``local`` on ``triangle``."""
    opposite = mesh.vertices[mesh.triangles[triangle, local]]
    sign = mesh.tri_signs[triangle, local]
    return sign * (np.asarray(x, dtype=float) - opposite) / (2.0 * mesh.areas[triangle])


def eval_rt0(mesh: Mesh, edge: int, x) -> np.ndarray:
    """Value of the basis function of ``edge`` at point ``x``.

    Returns zero outside the support. On the shared edge both pieces agree in
    their normal component; the left-cell piece is returned.
    """
    for cell in mesh.edge_cells[edge]:
        if cell >= 0 and contains(mesh, cell, x):
            local = int(np.flatnonzero(mesh.tri_edges[cell] == edge)[0])
            return local_basis(mesh, cell, local, x)
    return np.zeros(2)


def divergence(mesh: Mesh, edge: int, triangle: int) -> float:
    """Pointwise (constant) divergence of a basis function on a triangle."""
    k, l = mesh.edge_cells[edge]
    if triangle == k:
        return 1.0 / mesh.areas[triangle]
    if triangle == l:
        return -1.0 / mesh.areas[triangle]
    return 0.0


def _pieces_at(mesh: Mesh, points):
    """Values of the three local basis pieces at per-triangle points.

    Args:
        points: array (nt, nq, 2).

    Returns:
        Array (nt, nq, 3, 2): piece ``i`` evaluated at point ``q``.
    """
    corners = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    diff = points[:, :, None, :] - corners[:, None, :, :]
    scale = mesh.tri_signs / (2.0 * mesh.areas[:, None])  # (nt, 3)
    return diff * scale[:, None, :, None]


def flux_matrix_check(mesh: Mesh) -> float:
    """Max deviation of the edge fluxes of the basis from the identity.

    For every triangle and every pair of its edges ``(a, b)``, integrates the
    piece of ``phi_a`` on that triangle against the global normal of ``b``
    with 2-point Gauss quadrature. Pairs with disjoint support contribute
    exactly zero and are not enumerated.
    """
    worst = 0.0
    verts = mesh.vertices
    for j in range(3):
        edges_b = mesh.tri_edges[:, j]
        s = verts[mesh.edge_vertices[edges_b, 0]]
        e = verts[mesh.edge_vertices[edges_b, 1]]
        pts = s[:, None, :] + quad.GAUSS2_POINTS[None, :, None] * (e - s)[:, None, :]
        vals = _pieces_at(mesh, pts)  # (nt, 2, 3, 2)
        normal = mesh.normals[edges_b]
        flux = np.einsum("tqid,td,q->ti", vals, normal, quad.GAUSS2_WEIGHTS)
        flux *= mesh.lengths[edges_b][:, None]
        expected = np.zeros(3)
        expected[j] = 1.0
        worst = max(worst, float(np.max(np.abs(flux - expected))))
    return worst


def local_mass(mesh: Mesh, bary=quad.MIDPOINT3_POINTS, weights=quad.MIDPOINT3_WEIGHTS):
    """Element mass matrices, shape (nt, 3, 3), in local edge order."""
    corners = mesh.vertices[mesh.triangles]
    pts = quad.map_points(corners, bary)
    vals = _pieces_at(mesh, pts)
    return np.einsum("tqid,tqjd,q,t->tij", vals, vals, weights, mesh.areas)


def assemble_mass(mesh: Mesh) -> sps.csr_matrix:
    """Mass matrix ``M_ab = (phi_a, phi_b)`` with the edge-midpoint rule."""
    local = local_mass(mesh)
    rows = np.repeat(mesh.tri_edges, 3, axis=1).ravel()
    cols = np.tile(mesh.tri_edges, (1, 3)).ravel()
    return csr_from_triplets(rows, cols, local.ravel(), (mesh.n_edges, mesh.n_edges))


def assemble_div(mesh: Mesh) -> sps.csr_matrix:
    """``B[K, a] = integral over K of div phi_a``: +1 on K, -1 on L."""
    rows = mesh.edge_cells.ravel()
    cols = np.repeat(np.arange(mesh.n_edges), 2)
    vals = np.tile([1.0, -1.0], mesh.n_edges)
    keep = rows >= 0
    return csr_from_triplets(
        rows[keep], cols[keep], vals[keep], (mesh.n_triangles, mesh.n_edges)
    )


def evaluate_field(mesh: Mesh, fluxes, points) -> np.ndarray:
    """RT0 field with edge coefficients ``fluxes`` at per-triangle points.

    Args:
        points: array (nt, nq, 2).

    Returns:
        Array (nt, nq, 2).
    """
    coeffs = np.asarray(fluxes, dtype=float)[mesh.tri_edges]  # (nt, 3)
    return np.einsum("tqid,ti->tqd", _pieces_at(mesh, points), coeffs)


def cell_divergence(mesh: Mesh, fluxes) -> np.ndarray:
    """Constant divergence per triangle of the field with given edge fluxes."""
    fluxes = np.asarray(fluxes, dtype=float)
    return (mesh.tri_signs * fluxes[mesh.tri_edges]).sum(axis=1) / mesh.areas
