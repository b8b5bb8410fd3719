from math import factorial

import numpy as np
import pytest

from pgfv import quadrature as quad
from pgfv.linalg import solve_spd
from pgfv.mesh import build_mesh, build_structured_mesh
from pgfv.rt0 import (
    assemble_div,
    assemble_mass,
    eval_rt0,
    evaluate_field,
    flux_matrix_check,
    local_mass,
)

from .oracles import triangle_integral


@pytest.fixture(scope="module")
def reference_pair():
    # right triangle (0,0),(1,0),(0,1) plus its mirror across the hypotenuse
    return build_mesh([[0, 0], [1, 0], [0, 1], [1, 1]], [[0, 1, 2], [1, 3, 2]])


def test_zero_at_apex(mesh4):
    e = mesh4.interior_edges[3]
    k = mesh4.edge_cells[e, 0]
    apex = mesh4.opposite_vertex(k, e)
    assert np.allclose(eval_rt0(mesh4, e, mesh4.vertices[apex]), 0.0, atol=1e-15)


@pytest.mark.parametrize("perturbation", [0.0, 0.3])
def test_normal_component_at_midpoint(perturbation):
    mesh = build_structured_mesh(4, perturbation, seed=2)
    for e in range(mesh.n_edges):
        val = eval_rt0(mesh, e, mesh.midpoints[e])
        assert val @ mesh.normals[e] == pytest.approx(1.0 / mesh.lengths[e], rel=1e-12)


def test_zero_outside_support(mesh4):
    e = mesh4.interior_edges[0]
    support = set(mesh4.edge_cells[e])
    far = next(t for t in range(mesh4.n_triangles) if t not in support)
    assert np.array_equal(eval_rt0(mesh4, e, mesh4.centroids[far]), np.zeros(2))


def test_divergence_by_finite_differences():
    mesh = build_structured_mesh(3, 0.3, seed=4)
    rng = np.random.default_rng(0)
    step = 1e-6
    for e in range(mesh.n_edges):
        for sign, cell in zip((1.0, -1.0), mesh.edge_cells[e]):
            if cell < 0:
                continue
            lam = rng.dirichlet([4, 4, 4])
            x = lam @ mesh.vertices[mesh.triangles[cell]]
            dx = eval_rt0(mesh, e, x + [step, 0]) - eval_rt0(mesh, e, x - [step, 0])
            dy = eval_rt0(mesh, e, x + [0, step]) - eval_rt0(mesh, e, x - [0, step])
            div = (dx[0] + dy[1]) / (2 * step)
            expected = sign / mesh.areas[cell]
            assert div == pytest.approx(expected, rel=1e-5)


def test_flux_duality_perturbed():
    mesh = build_structured_mesh(4, 0.3, seed=42)
    assert flux_matrix_check(mesh) <= 1e-12


def test_flux_of_edge_on_itself(reference_pair):
    mesh = reference_pair
    e = mesh.interior_edges[0]
    s, n = mesh.vertices[mesh.edge_vertices[e]]
    t, w = np.polynomial.legendre.leggauss(3)
    pts = s + np.outer(0.5 * (t + 1), n - s)
    flux = sum(
        0.5 * wi * (eval_rt0(mesh, e, p) @ mesh.normals[e]) for p, wi in zip(pts, w)
    ) * mesh.lengths[e]
    assert flux == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_midpoint_rule_exact_to_degree_two(degree):
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = quad.map_points(corners[None], quad.MIDPOINT3_POINTS)[0]
    for i in range(degree + 1):
        j = degree - i
        approx = 0.5 * np.sum(quad.MIDPOINT3_WEIGHTS * pts[:, 0] ** i * pts[:, 1] ** j)
        # int x^i y^j over the unit triangle = i! j! / (i + j + 2)!
        exact = factorial(i) * factorial(j) / factorial(i + j + 2)
        assert approx == pytest.approx(exact, abs=1e-15)


@pytest.mark.parametrize("degree", range(6))
def test_degree_five_rule(degree):
    pts = quad.DEG5_POINTS[:, 1:]
    for i in range(degree + 1):
        j = degree - i
        approx = 0.5 * np.sum(quad.DEG5_WEIGHTS * pts[:, 0] ** i * pts[:, 1] ** j)
        exact = factorial(i) * factorial(j) / factorial(i + j + 2)
        assert approx == pytest.approx(exact, abs=1e-15)


def test_hypotenuse_mass_entry(reference_pair):
    mesh = reference_pair
    e = mesh.interior_edges[0]
    local = local_mass(mesh)
    i = int(np.flatnonzero(mesh.tri_edges[0] == e)[0])
    # oracle: phi = x - (0, 0) on the reference triangle, integrated by a
    # collapsed Gauss rule: int (x^2 + y^2) = 1/6
    oracle = triangle_integral(
        [[0, 0], [1, 0], [0, 1]], lambda x: np.sum(x * x, axis=1)
    )
    assert oracle == pytest.approx(1 / 6, abs=1e-15)
    assert local[0, i, i] == pytest.approx(oracle, abs=1e-14)


def test_mass_symmetric_positive_definite():
    mesh = build_structured_mesh(4, 0.3, seed=42)
    m = assemble_mass(mesh)
    assert abs(m - m.T).max() <= 1e-15
    np.linalg.cholesky(m.toarray())


def test_mass_sparsity(mesh4):
    m = assemble_mass(mesh4).tocoo()
    for a, b in zip(m.row, m.col):
        ca = set(mesh4.edge_cells[a]) - {-1}
        cb = set(mesh4.edge_cells[b]) - {-1}
        assert ca & cb
    assert m.nnz <= 5 * mesh4.n_edges


def test_mass_applied_to_constant_field():
    mesh = build_structured_mesh(3, 0.25, seed=9)
    c = np.array([0.7, -1.3])
    # fluxes of a constant field are |a| c.n
    fluxes = mesh.lengths * (mesh.normals @ c)
    lhs = assemble_mass(mesh) @ fluxes
    rhs = np.zeros(mesh.n_edges)
    for e in range(mesh.n_edges):
        for cell in mesh.edge_cells[e]:
            if cell < 0:
                continue
            corners = mesh.vertices[mesh.triangles[cell]]
            rhs[e] += triangle_integral(
                corners, lambda x: np.array([eval_rt0_piece(mesh, e, cell, p) @ c for p in x])
            )
    assert np.allclose(lhs, rhs, atol=1e-13)


def eval_rt0_piece(mesh, e, cell, x):
    sign = 1.0 if cell == mesh.edge_cells[e, 0] else -1.0
    apex = mesh.vertices[mesh.opposite_vertex(cell, e)]
    return sign * (x - apex) / (2 * mesh.areas[cell])


def test_constant_field_is_reproduced():
    mesh = build_structured_mesh(3, 0.25, seed=9)
    c = np.array([0.7, -1.3])
    fluxes = mesh.lengths * (mesh.normals @ c)
    pts = quad.map_points(mesh.vertices[mesh.triangles], quad.DEG5_POINTS)
    assert np.allclose(evaluate_field(mesh, fluxes, pts), c, atol=1e-13)


def test_divergence_columns(mesh8_perturbed):
    b = assemble_div(mesh8_perturbed).toarray()
    for e in range(mesh8_perturbed.n_edges):
        col = b[:, e]
        if mesh8_perturbed.is_boundary(e):
            assert sorted(col[col != 0]) == [1.0]
        else:
            assert sorted(col[col != 0]) == [-1.0, 1.0]
    assert set(np.unique(b)) <= {-1.0, 0.0, 1.0}


def test_divergence_rows_match_incidence(mesh8_perturbed):
    mesh = mesh8_perturbed
    b = assemble_div(mesh).toarray()
    for t in range(mesh.n_triangles):
        expected = np.zeros(mesh.n_edges)
        expected[mesh.tri_edges[t]] = mesh.tri_signs[t]
        assert np.array_equal(b[t], expected)
        n_bd = sum(mesh.is_boundary(e) for e in mesh.tri_edges[t])
        if n_bd == 0:
            assert abs(b[t].sum()) in (1.0, 3.0)


def test_mass_factorisation_through_solver(mesh8_perturbed):
    m = assemble_mass(mesh8_perturbed)
    b = np.ones(m.shape[0])
    x = solve_spd(m, b)
    assert np.linalg.norm(m @ x - b) <= 1e-10 * np.linalg.norm(b)
